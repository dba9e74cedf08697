//! Experiment configuration.
//!
//! A [`ScenarioConfig`] fully determines one experiment cell: topology
//! shape, task distribution, GA settings, engine granularity, and the
//! optimization scheme. Configs load from TOML, carry defaults matching the
//! reference evaluation setup, and hash to a short fingerprint so output
//! rows can be traced back to the exact configuration that produced them.
//!
//! Reproducibility contract: every run is driven by one master seed. The
//! master seed is split into four independent streams (task generation,
//! solver, training fading, evaluation fading) by taking successive outputs
//! of a SplitMix64 generator seeded with the master seed. Training and
//! evaluation fading differ so a solver is scored on channel realizations
//! it never saw while searching; setting `clairvoyant_fading = true`
//! collapses the two for debugging.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use crate::{Error, Result};

/// Which allocator produces the assignment under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// GA minimizing the number of deadline misses.
    Deterministic,
    /// GA minimizing summed task durations (min-latency benchmark).
    Benchmark,
    /// Uniform random target and priorities, no search.
    Random,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Deterministic, Scheme::Benchmark, Scheme::Random];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Deterministic => "deterministic",
            Scheme::Benchmark => "benchmark",
            Scheme::Random => "random",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Scheme::Deterministic),
            "benchmark" => Ok(Scheme::Benchmark),
            "random" => Ok(Scheme::Random),
            other => Err(Error::Config(format!(
                "scheme: unknown scheme {other:?} (expected deterministic, benchmark, or random)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Unit counts, clock rates, and radio parameters of the continuum tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub sne_count: usize,
    pub lc_count: usize,
    pub hc_count: usize,
    pub edge_count: usize,
    pub cloud_count: usize,
    /// Clock rates in cycles per second. SNEs never process and have none.
    pub lc_power_hz: f64,
    pub hc_power_hz: f64,
    pub edge_power_hz: f64,
    pub cloud_power_hz: f64,
    /// Total bandwidth shared by all links inside the subnetwork.
    pub intra_pool_bandwidth_hz: f64,
    /// Total bandwidth of the HC-to-edge parent link.
    pub parent_pool_bandwidth_hz: f64,
    /// Bandwidth of one OFDMA resource; pools hold floor(pool / resource)
    /// resources. 360 kHz is one physical resource block at 30 kHz
    /// subcarrier spacing.
    pub resource_bandwidth_hz: f64,
    /// Mean SINR on every link inside the subnetwork.
    pub intra_sinr_db: f64,
    /// Mean SINR on the HC-to-edge link.
    pub parent_sinr_db: f64,
    /// Fixed rate of the contention-free edge-to-cloud wire.
    pub backhaul_rate_bps: f64,
    /// Window over which a unit's cycle budget (clock rate times window) is
    /// enforced. Defaults to the task generation horizon when unset.
    pub capacity_window_s: Option<f64>,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            sne_count: 35,
            lc_count: 4,
            hc_count: 1,
            edge_count: 1,
            cloud_count: 1,
            lc_power_hz: 2.5e9,
            hc_power_hz: 5.0e9,
            edge_power_hz: 70.0e9,
            cloud_power_hz: 150.0e9,
            intra_pool_bandwidth_hz: 100.0e6,
            parent_pool_bandwidth_hz: 50.0e6,
            resource_bandwidth_hz: 360.0e3,
            intra_sinr_db: 30.0,
            parent_sinr_db: 27.0,
            backhaul_rate_bps: 1.0e9,
            capacity_window_s: None,
        }
    }
}

/// Task population: how many tasks to draw and from which distributions.
/// All ranges are uniform over `[lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub count: usize,
    /// Fraction of tasks originating at SNEs, LCs, and the HC. Must sum to 1.
    pub sne_share: f64,
    pub lc_share: f64,
    pub hc_share: f64,
    pub workload_cycles: (f64, f64),
    pub size_bits: (f64, f64),
    /// Result payload as a fraction of the input payload.
    pub result_fraction: f64,
    /// Completion budget relative to generation time.
    pub deadline_s: (f64, f64),
    /// Generation times are uniform over [0, horizon).
    pub horizon_s: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            count: 45,
            sne_share: 0.60,
            lc_share: 0.20,
            hc_share: 0.20,
            workload_cycles: (20.0e6, 50.0e6),
            size_bits: (750.0e3, 2.25e6),
            result_fraction: 0.15,
            deadline_s: (0.020, 0.100),
            horizon_s: 0.100,
        }
    }
}

/// Genetic algorithm knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene reset probability.
    pub mutation_prob: f64,
    pub tournament_size: usize,
    /// Fraction of the population copied unchanged into the next generation.
    pub elite_fraction: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 1000,
            generations: 10,
            crossover_prob: 0.90,
            mutation_prob: 0.05,
            tournament_size: 4,
            elite_fraction: 0.01,
        }
    }
}

/// Simulation granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Slot length of the radio clock; transmissions advance per slot.
    pub slot_s: f64,
    /// Per-slot cap on pool resources granted to one task.
    pub max_resources_per_task: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { slot_s: 5.0e-4, max_resources_per_task: 16 }
    }
}

/// Cost constants for objective functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    /// Added once per missed deadline and once per overcommitted unit.
    pub miss_penalty: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig { miss_penalty: 100.0 }
    }
}

/// One adaptive-modulation entry above the BPSK floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsThreshold {
    /// Constellation size (4 = QPSK, 16, 64, 256, ...). Power of two, >= 4.
    pub constellation: u32,
    /// Minimum instantaneous SINR, in dB, at which this scheme is selected.
    pub min_sinr_db: f64,
}

/// Modulation and coding configuration. BPSK is always available as the
/// floor scheme with no threshold; `thresholds` lists the schemes above it
/// in strictly increasing constellation and SINR order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McsConfig {
    /// None selects the built-in ladder: QPSK at 5 dB, 16-QAM at 11 dB,
    /// 64-QAM at 18 dB, 256-QAM at 24 dB.
    pub thresholds: Option<Vec<McsThreshold>>,
    /// Fixed bit error rate per constellation (keyed by its decimal string),
    /// replacing the analytic approximation where present.
    pub ber_override: Option<BTreeMap<String, f64>>,
}

/// Everything one experiment cell needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    /// Master seeds; each seed is one independent run of the cell.
    pub seeds: Vec<u64>,
    /// Score solutions on the same fading the solver trained on.
    pub clairvoyant_fading: bool,
    /// Evaluation budget for the exhaustive oracle.
    pub oracle_budget: u64,
    pub topology: TopologyConfig,
    pub tasks: TaskConfig,
    pub ga: GaConfig,
    pub engine: EngineConfig,
    pub penalty: PenaltyConfig,
    pub mcs: McsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scheme: Scheme::Deterministic,
            seeds: vec![0],
            clairvoyant_fading: false,
            oracle_budget: 1_000_000,
            topology: TopologyConfig::default(),
            tasks: TaskConfig::default(),
            ga: GaConfig::default(),
            engine: EngineConfig::default(),
            penalty: PenaltyConfig::default(),
            mcs: McsConfig::default(),
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_range(field: &str, (lo, hi): (f64, f64)) -> Result<()> {
    ensure(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi, || {
        format!("{field}: expected 0 < lo <= hi, got ({lo}, {hi})")
    })
}

impl ScenarioConfig {
    /// Parse and validate a TOML config. Unknown keys are rejected so typos
    /// surface instead of silently falling back to defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Window over which unit cycle budgets are enforced.
    pub fn capacity_window_s(&self) -> f64 {
        self.topology.capacity_window_s.unwrap_or(self.tasks.horizon_s)
    }

    /// Short stable hash of the full resolved configuration. Two runs share
    /// a fingerprint exactly when every parameter (seeds excluded) matches.
    pub fn fingerprint(&self) -> String {
        let mut keyless = self.clone();
        keyless.seeds = Vec::new();
        let bytes = serde_json::to_vec(&keyless).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        ensure(t.hc_count == 1, || {
            format!("topology.hc_count: exactly one high-level controller is supported, got {}", t.hc_count)
        })?;
        ensure(t.edge_count == 1, || {
            format!("topology.edge_count: exactly one edge server is supported, got {}", t.edge_count)
        })?;
        ensure(t.cloud_count == 1, || {
            format!("topology.cloud_count: exactly one cloud is supported, got {}", t.cloud_count)
        })?;
        ensure(t.lc_count >= 1, || {
            format!("topology.lc_count: at least one local controller is required, got {}", t.lc_count)
        })?;
        for (field, v) in [
            ("topology.lc_power_hz", t.lc_power_hz),
            ("topology.hc_power_hz", t.hc_power_hz),
            ("topology.edge_power_hz", t.edge_power_hz),
            ("topology.cloud_power_hz", t.cloud_power_hz),
            ("topology.backhaul_rate_bps", t.backhaul_rate_bps),
            ("topology.resource_bandwidth_hz", t.resource_bandwidth_hz),
        ] {
            ensure(v.is_finite() && v > 0.0, || format!("{field}: must be positive, got {v}"))?;
        }
        for (field, pool) in [
            ("topology.intra_pool_bandwidth_hz", t.intra_pool_bandwidth_hz),
            ("topology.parent_pool_bandwidth_hz", t.parent_pool_bandwidth_hz),
        ] {
            ensure(pool >= t.resource_bandwidth_hz, || {
                format!("{field}: pool ({pool} Hz) is narrower than one resource ({} Hz)", t.resource_bandwidth_hz)
            })?;
        }
        if let Some(w) = t.capacity_window_s {
            ensure(w.is_finite() && w > 0.0, || {
                format!("topology.capacity_window_s: must be positive, got {w}")
            })?;
        }

        let k = &self.tasks;
        let share_sum = k.sne_share + k.lc_share + k.hc_share;
        ensure(
            k.sne_share >= 0.0 && k.lc_share >= 0.0 && k.hc_share >= 0.0
                && (share_sum - 1.0).abs() <= 1e-9,
            || format!("tasks.sne_share/lc_share/hc_share: origin shares must be nonnegative and sum to 1, got {share_sum}"),
        )?;
        check_range("tasks.workload_cycles", k.workload_cycles)?;
        check_range("tasks.size_bits", k.size_bits)?;
        check_range("tasks.deadline_s", k.deadline_s)?;
        ensure((0.0..=1.0).contains(&k.result_fraction), || {
            format!("tasks.result_fraction: must lie in [0, 1], got {}", k.result_fraction)
        })?;
        ensure(k.horizon_s.is_finite() && k.horizon_s > 0.0, || {
            format!("tasks.horizon_s: must be positive, got {}", k.horizon_s)
        })?;

        let g = &self.ga;
        ensure(g.population >= 2, || {
            format!("ga.population: at least 2 required, got {}", g.population)
        })?;
        ensure(g.generations >= 1, || {
            format!("ga.generations: at least 1 required, got {}", g.generations)
        })?;
        for (field, p) in [
            ("ga.crossover_prob", g.crossover_prob),
            ("ga.mutation_prob", g.mutation_prob),
            ("ga.elite_fraction", g.elite_fraction),
        ] {
            ensure((0.0..=1.0).contains(&p), || format!("{field}: must lie in [0, 1], got {p}"))?;
        }
        ensure(g.tournament_size >= 1 && g.tournament_size <= g.population, || {
            format!("ga.tournament_size: must lie in 1..=population, got {}", g.tournament_size)
        })?;

        ensure(self.engine.slot_s.is_finite() && self.engine.slot_s > 0.0, || {
            format!("engine.slot_s: must be positive, got {}", self.engine.slot_s)
        })?;
        ensure(self.engine.max_resources_per_task >= 1, || {
            "engine.max_resources_per_task: must be at least 1".to_string()
        })?;
        ensure(self.penalty.miss_penalty > 0.0, || {
            format!("penalty.miss_penalty: must be positive, got {}", self.penalty.miss_penalty)
        })?;

        if let Some(entries) = &self.mcs.thresholds {
            let mut prev: Option<&McsThreshold> = None;
            for e in entries {
                ensure(e.constellation >= 4 && e.constellation.is_power_of_two(), || {
                    format!("mcs.thresholds: constellation must be a power of two >= 4, got {}", e.constellation)
                })?;
                ensure(e.min_sinr_db.is_finite(), || {
                    format!("mcs.thresholds: threshold for {} must be finite", e.constellation)
                })?;
                if let Some(p) = prev {
                    ensure(
                        e.constellation > p.constellation && e.min_sinr_db > p.min_sinr_db,
                        || format!(
                            "mcs.thresholds: entries must strictly increase in constellation and threshold ({} after {})",
                            e.constellation, p.constellation
                        ),
                    )?;
                }
                prev = Some(e);
            }
        }
        if let Some(map) = &self.mcs.ber_override {
            for (key, v) in map {
                let m: u32 = key.parse().map_err(|_| {
                    Error::Config(format!("mcs.ber_override: key {key:?} is not a constellation size"))
                })?;
                ensure(m >= 2 && m.is_power_of_two(), || {
                    format!("mcs.ber_override: constellation must be a power of two >= 2, got {m}")
                })?;
                ensure((0.0..=0.5).contains(v), || {
                    format!("mcs.ber_override.{key}: BER must lie in [0, 0.5], got {v}")
                })?;
            }
        }
        Ok(())
    }
}

/// SplitMix64 state advance; returns the next output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    mix64(*state)
}

/// SplitMix64 finalizer: a cheap stateless avalanche of one word.
#[inline]
pub fn mix64(z: u64) -> u64 {
    let z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The four independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStreams {
    pub task_gen: u64,
    pub solver: u64,
    pub training_fading: u64,
    pub evaluation_fading: u64,
}

impl SeedStreams {
    /// Streams are the first four outputs of SplitMix64 seeded with `master`.
    pub fn derive(master: u64) -> Self {
        let mut state = master;
        SeedStreams {
            task_gen: splitmix64(&mut state),
            solver: splitmix64(&mut state),
            training_fading: splitmix64(&mut state),
            evaluation_fading: splitmix64(&mut state),
        }
    }

    /// Fading seed used when scoring a solution, honoring the clairvoyant
    /// debugging switch.
    pub fn scoring_fading(&self, clairvoyant: bool) -> u64 {
        if clairvoyant {
            self.training_fading
        } else {
            self.evaluation_fading
        }
    }
}
