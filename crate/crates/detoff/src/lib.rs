//! Slot-accurate simulator and optimizer for deterministic task offloading
//! across a subnetwork / edge / cloud continuum.
//!
//! The modeled system is a tree: subnetwork elements (SNEs) attach to local
//! controllers (LCs), LCs to a high-level controller (HC), the HC to an edge
//! server, and the edge to the cloud. Tasks appear at SNEs, LCs, or the HC
//! and either run where computing power exists or are offloaded upward hop
//! by hop. Wireless hops share two OFDMA resource pools under Rayleigh
//! fading with adaptive modulation; the edge-cloud hop is a fixed-rate wire.
//! Time advances in half-millisecond slots: each slot the simulator grants
//! pooled resources to active transmissions, moves bits, runs per-unit
//! earliest-deadline-first processor queues, and kills tasks whose deadline
//! has passed.
//!
//! Module map, bottom up:
//!
//! * [`config`] — scenario description, validation, seed-stream derivation.
//! * [`topology`] — units, links, pools, routing, offload target sets.
//! * [`channel`] — fading, modulation selection, per-resource rates.
//! * [`taskgen`] — seeded random task sets.
//! * [`engine`] — the slot-by-slot simulator.
//! * [`objective`] — deadline and latency objectives, feasibility checks.
//! * [`solvers`] — genetic allocator, random baseline, exhaustive oracle.
//! * [`metrics`] — per-run reports and cross-seed aggregation.
//! * [`runner`] — seed orchestration, parameter sweeps, CSV output.

pub mod channel;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod objective;
pub mod runner;
pub mod solvers;
pub mod taskgen;
pub mod topology;

pub use config::{ScenarioConfig, Scheme, SeedStreams};
pub use engine::{simulate, Assignment, ExecutionRecord, SimOutcome, SimParams};
pub use metrics::{aggregate, build_report, AggregateReport, MetricsReport};
pub use runner::{run, run_seed, sweep, RunResult, SeedResult, SweepAxes};
pub use solvers::{exhaustive_oracle, ga_solve, random_allocate, SolveContext, SolveOutcome};
pub use taskgen::Task;
pub use topology::{Topology, UnitId, UnitKind};

/// Unified error type: every fallible path in the crate reports through
/// this enum so binaries can render one consistent message.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("task generation: {0}")]
    TaskGen(String),
    #[error("engine: {0}")]
    Engine(String),
    #[error("metrics: {0}")]
    Metrics(String),
    #[error(
        "exhaustive search needs {needed} evaluations, over the budget of {budget}; \
         shrink the instance or raise the budget"
    )]
    OracleTooLarge { needed: u128, budget: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
