//! Objective functions and feasibility checks over simulation outcomes.
//!
//! The deterministic allocation scheme minimizes the sum of a step penalty
//! over normalized completion times: a task costs nothing while it finishes
//! within its deadline and a flat `miss_penalty` once it does not. The
//! latency benchmark instead minimizes the plain sum of end-to-end times.
//! Both read the same [`ExecutionRecord`]s, so any solver can score either
//! way.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::engine::{Assignment, ExecutionRecord, SimOutcome};
use crate::taskgen::Task;
use crate::topology::{Topology, UnitId};
use crate::{Error, Result};

/// Step cost of one normalized completion time: free inside (0, 1], the
/// flat `miss_penalty` outside.
#[inline]
pub fn step_penalty(normalized: f64, miss_penalty: f64) -> f64 {
    if (0.0..=1.0).contains(&normalized) {
        0.0
    } else {
        miss_penalty
    }
}

/// What a solver is asked to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    /// Sum of step penalties over `total / deadline`: counts misses.
    DeadlineMiss,
    /// Sum of end-to-end times in seconds.
    TotalLatency,
}

/// Score records under `kind`. Records must be aligned with `tasks` by
/// index, as [`crate::engine::simulate`] returns them.
pub fn objective_value(
    kind: ObjectiveKind,
    records: &[ExecutionRecord],
    tasks: &[Task],
    miss_penalty: f64,
) -> f64 {
    match kind {
        ObjectiveKind::DeadlineMiss => deadline_objective(records, tasks, miss_penalty),
        ObjectiveKind::TotalLatency => latency_objective(records),
    }
}

/// Σ `step_penalty(total_s / deadline_s)`: `miss_penalty` per missed task.
pub fn deadline_objective(records: &[ExecutionRecord], tasks: &[Task], miss_penalty: f64) -> f64 {
    records
        .iter()
        .zip(tasks)
        .map(|(r, t)| step_penalty(r.total_s / t.deadline_s, miss_penalty))
        .sum()
}

/// Σ `total_s`. Failed tasks carry their failure charge, so losing a task
/// is never an improvement.
pub fn latency_objective(records: &[ExecutionRecord]) -> f64 {
    records.iter().map(|r| r.total_s).sum()
}

/// Units whose committed workload exceeds their cycle budget under this
/// assignment. Empty means the assignment respects computing capacity.
pub fn capacity_violations(
    topo: &Topology,
    tasks: &[Task],
    assignment: &Assignment,
) -> Vec<UnitId> {
    let mut committed = vec![0.0f64; topo.units.len()];
    for t in tasks {
        committed[assignment.targets[t.id].0] += t.workload_cycles;
    }
    topo.units
        .iter()
        .filter(|u| committed[u.id.0] > u.cycle_budget)
        .map(|u| u.id)
        .collect()
}

/// One verified property of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub ok: bool,
    pub detail: String,
}

impl ConstraintCheck {
    fn pass(detail: impl Into<String>) -> ConstraintCheck {
        ConstraintCheck { ok: true, detail: detail.into() }
    }

    fn fail(detail: impl Into<String>) -> ConstraintCheck {
        ConstraintCheck { ok: false, detail: detail.into() }
    }
}

/// Verdict over every modeled constraint for one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Each task runs on exactly one unit on its upward path.
    pub single_target: ConstraintCheck,
    /// No pool resource serves two transmissions in one slot.
    pub resource_exclusivity: ConstraintCheck,
    /// No link carries more bits per slot than its granted rate.
    pub link_rate_budget: ConstraintCheck,
    /// Every completed hop moved exactly its payload.
    pub payload_conservation: ConstraintCheck,
    /// Committed cycles fit every unit's budget.
    pub unit_capacity: ConstraintCheck,
}

impl ConstraintReport {
    pub fn all_ok(&self) -> bool {
        self.single_target.ok
            && self.resource_exclusivity.ok
            && self.link_rate_budget.ok
            && self.payload_conservation.ok
            && self.unit_capacity.ok
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let line = |f: &mut fmt::Formatter<'_>, name: &str, c: &ConstraintCheck| {
            writeln!(f, "{}: {} — {}", name, if c.ok { "ok" } else { "VIOLATED" }, c.detail)
        };
        line(f, "single-target", &self.single_target)?;
        line(f, "resource-exclusivity", &self.resource_exclusivity)?;
        line(f, "link-rate-budget", &self.link_rate_budget)?;
        line(f, "payload-conservation", &self.payload_conservation)?;
        line(f, "unit-capacity", &self.unit_capacity)
    }
}

/// Build the report for an outcome simulated with invariant checking on.
pub fn check_constraints(
    topo: &Topology,
    tasks: &[Task],
    assignment: &Assignment,
    outcome: &SimOutcome,
) -> Result<ConstraintReport> {
    if outcome.invariants.slots == 0 && !tasks.is_empty() {
        return Err(Error::Metrics(
            "constraint report needs a run with invariant checking enabled".to_string(),
        ));
    }
    let inv = &outcome.invariants;
    let single_target = match assignment.validate(topo, tasks) {
        Ok(()) => ConstraintCheck::pass(format!("{} tasks on valid targets", tasks.len())),
        Err(e) => ConstraintCheck::fail(e.to_string()),
    };
    let count_check = |violations: u64, what: &str| {
        if violations == 0 {
            ConstraintCheck::pass(format!("none in {} checked slots", inv.slots))
        } else {
            ConstraintCheck::fail(format!("{violations} {what} in {} slots", inv.slots))
        }
    };
    let overloaded = capacity_violations(topo, tasks, assignment);
    let unit_capacity = if overloaded.is_empty() {
        ConstraintCheck::pass("all unit budgets respected")
    } else {
        let list: Vec<String> = overloaded.iter().map(|u| u.to_string()).collect();
        ConstraintCheck::fail(format!("over budget: {}", list.join(", ")))
    };
    Ok(ConstraintReport {
        single_target,
        resource_exclusivity: count_check(inv.resource_double_bookings, "double bookings"),
        link_rate_budget: count_check(inv.link_rate_overruns, "rate overruns"),
        payload_conservation: count_check(inv.payload_mismatches, "payload mismatches"),
        unit_capacity,
    })
}
