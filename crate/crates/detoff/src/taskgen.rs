//! Seeded random task sets.
//!
//! Each task is a compute job with a wireless footprint: it appears at an
//! origin unit at a generation time, carries an input payload and a cycle
//! workload, and must deliver a (smaller) result payload back to its origin
//! before a per-task deadline. All fields are drawn uniformly from
//! configured ranges with a caller-supplied generator, so a task set is a
//! pure function of configuration and seed.
//!
//! Per task the draw order is fixed — generation time, workload, input
//! size, deadline, origin kind, origin index — and is part of the
//! reproducibility contract: reordering the draws would silently change
//! every seeded scenario.

use rand::Rng;

use crate::config::TaskConfig;
use crate::topology::{Topology, UnitId, UnitKind};
use crate::{Error, Result};

/// One offloadable job.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: usize,
    /// Unit where the task appears and where its result must return.
    pub origin: UnitId,
    pub gen_time_s: f64,
    pub workload_cycles: f64,
    /// Input payload moved toward the processing unit.
    pub size_bits: f64,
    /// Result payload moved back to the origin.
    pub result_bits: f64,
    /// Completion budget, relative to `gen_time_s`.
    pub deadline_s: f64,
}

impl Task {
    /// Absolute time by which the result must be back at the origin.
    pub fn due_s(&self) -> f64 {
        self.gen_time_s + self.deadline_s
    }
}

/// Uniform draw that tolerates a degenerate point range.
fn uniform<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.gen_range(range.0..range.1)
    }
}

/// Draw `cfg.count` tasks over the units of `topo`.
///
/// Origin kinds follow the configured SNE/LC/HC shares; within a kind the
/// unit is uniform. Kinds with zero share need no units, but a positive
/// share over an absent kind is an error rather than a silent reweighting.
pub fn generate_tasks<R: Rng + ?Sized>(
    cfg: &TaskConfig,
    topo: &Topology,
    rng: &mut R,
) -> Result<Vec<Task>> {
    let kinds = [
        (UnitKind::Sne, cfg.sne_share),
        (UnitKind::Lc, cfg.lc_share),
        (UnitKind::Hc, cfg.hc_share),
    ];
    let mut pools: Vec<(f64, Vec<UnitId>)> = Vec::with_capacity(kinds.len());
    for (kind, share) in kinds {
        let units: Vec<UnitId> = topo.units_of_kind(kind).map(|u| u.id).collect();
        if share > 0.0 && units.is_empty() {
            return Err(Error::TaskGen(format!(
                "{} share is {share} but the topology has no such unit",
                kind.name()
            )));
        }
        pools.push((share, units));
    }

    let mut tasks = Vec::with_capacity(cfg.count);
    for id in 0..cfg.count {
        let gen_time_s = uniform(rng, (0.0, cfg.horizon_s));
        let workload_cycles = uniform(rng, cfg.workload_cycles);
        let size_bits = uniform(rng, cfg.size_bits);
        let deadline_s = uniform(rng, cfg.deadline_s);

        let roll: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = None;
        for (share, units) in &pools {
            acc += share;
            if roll < acc {
                chosen = Some(units);
                break;
            }
        }
        // Shares sum to 1 up to rounding; land any residual mass on the
        // last populated kind.
        let units = chosen
            .unwrap_or_else(|| &pools.iter().rev().find(|(s, _)| *s > 0.0).unwrap().1);
        let origin = units[rng.gen_range(0..units.len())];

        tasks.push(Task {
            id,
            origin,
            gen_time_s,
            workload_cycles,
            size_bits,
            result_bits: cfg.result_fraction * size_bits,
            deadline_s,
        });
    }
    Ok(tasks)
}

/// Expected totals over a draw: (cycles, input bits). Useful for sizing
/// capacity against an offered load.
pub fn expected_totals(cfg: &TaskConfig) -> (f64, f64) {
    let mean = |r: (f64, f64)| 0.5 * (r.0 + r.1);
    let n = cfg.count as f64;
    (n * mean(cfg.workload_cycles), n * mean(cfg.size_bits))
}

/// Render tasks as CSV. Floats print in shortest round-trip form, so
/// [`parse_table`] recovers the exact values.
pub fn write_table(tasks: &[Task]) -> String {
    let mut out =
        String::from("task,origin,gen_time_s,workload_cycles,size_bits,result_bits,deadline_s\n");
    for t in tasks {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            t.id, t.origin.0, t.gen_time_s, t.workload_cycles, t.size_bits, t.result_bits,
            t.deadline_s
        ));
    }
    out
}

/// Parse the format written by [`write_table`].
pub fn parse_table(text: &str) -> Result<Vec<Task>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "task,origin,gen_time_s,workload_cycles,size_bits,result_bits,deadline_s" {
        return Err(Error::TaskGen(format!("unexpected task table header: {header:?}")));
    }
    let mut tasks = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::TaskGen(format!(
                "task table line {}: expected 7 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            fields[i].parse().map_err(|e| {
                Error::TaskGen(format!("task table line {}: {e}", lineno + 2))
            })
        };
        tasks.push(Task {
            id: fields[0]
                .parse()
                .map_err(|e| Error::TaskGen(format!("task table line {}: {e}", lineno + 2)))?,
            origin: UnitId(
                fields[1]
                    .parse()
                    .map_err(|e| Error::TaskGen(format!("task table line {}: {e}", lineno + 2)))?,
            ),
            gen_time_s: parse(2)?,
            workload_cycles: parse(3)?,
            size_bits: parse(4)?,
            result_bits: parse(5)?,
            deadline_s: parse(6)?,
        });
    }
    Ok(tasks)
}
