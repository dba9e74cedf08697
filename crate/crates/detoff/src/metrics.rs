//! Evaluation metrics computed from execution records, the decision under
//! test, and the engine's utilization trace.
//!
//! A single run produces a [`MetricsReport`]: satisfied-task ratio, leftover
//! time-budget samples, saturation probabilities at task-arrival instants,
//! allocation shares per computing-unit kind, the sizes and workloads of
//! tasks offloaded past the subnetwork boundary, and the makespan. Reports
//! from many seeds fold into an [`AggregateReport`] of means, standard
//! deviations, and percentile tables.

use crate::engine::{Assignment, ExecutionRecord, SimOutcome, UtilizationTrace};
use crate::taskgen::Task;
use crate::topology::{Topology, UnitKind};
use crate::{Error, Result};

/// Fraction of tasks assigned to each kind of computing unit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Shares {
    pub lc: f64,
    pub hc: f64,
    pub edge: f64,
    pub cloud: f64,
}

impl Shares {
    pub fn sum(&self) -> f64 {
        self.lc + self.hc + self.edge + self.cloud
    }
}

/// Everything measured from one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub task_count: usize,
    /// Tasks that finished no later than their deadline.
    pub satisfied_count: usize,
    pub satisfied_ratio: f64,
    /// Per satisfied task: leftover deadline fraction (deadline − total) / deadline.
    pub budget_samples: Vec<f64>,
    /// Fraction of task arrivals that found the resource pools > threshold busy.
    pub comm_saturation: f64,
    /// Fraction of task arrivals that found the computing capacity > threshold committed.
    pub compute_saturation: f64,
    pub shares: Shares,
    /// Input sizes of tasks placed on the edge or cloud.
    pub offloaded_size_bits: Vec<f64>,
    /// Workloads of tasks placed on the edge or cloud.
    pub offloaded_workload_cycles: Vec<f64>,
    /// Completion instant of the last satisfied task; 0 when none finished.
    pub makespan_s: f64,
}

/// Share of records that completed within their deadline. Empty record sets
/// have no meaningful ratio and are rejected.
pub fn satisfied_ratio(records: &[ExecutionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Metrics(
            "satisfied ratio is undefined for an empty record set".into(),
        ));
    }
    Ok(satisfied_count(records) as f64 / records.len() as f64)
}

fn satisfied_count(records: &[ExecutionRecord]) -> usize {
    records.iter().filter(|r| r.on_time).count()
}

/// Leftover deadline fraction per satisfied task: 0 means it finished at the
/// wire, 1 means instantaneous. Tasks that missed or never finished carry no
/// sample.
pub fn normalized_budgets(records: &[ExecutionRecord], tasks: &[Task]) -> Vec<f64> {
    records
        .iter()
        .zip(tasks)
        .filter(|(r, _)| r.on_time)
        .map(|(r, t)| (t.deadline_s - r.total_s) / t.deadline_s)
        .collect()
}

/// Fraction of samples strictly above `threshold`; 0 for an empty set.
pub fn saturation_probability(samples: &[f64], threshold: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hot = samples.iter().filter(|&&u| u > threshold).count();
    hot as f64 / samples.len() as f64
}

/// Pool and computing utilization observed at each task's generation
/// instant, as two sample vectors (communication, computing).
pub fn arrival_utilization(trace: &UtilizationTrace, tasks: &[Task]) -> (Vec<f64>, Vec<f64>) {
    let comm = tasks.iter().map(|t| trace.comm_at(t.gen_time_s)).collect();
    let compute = tasks.iter().map(|t| trace.compute_at(t.gen_time_s)).collect();
    (comm, compute)
}

/// Histogram of assignment targets by unit kind, normalized by task count.
/// All zero for an empty assignment.
pub fn allocation_shares(assignment: &Assignment, topo: &Topology) -> Shares {
    let n = assignment.targets.len();
    if n == 0 {
        return Shares::default();
    }
    let mut shares = Shares::default();
    let w = 1.0 / n as f64;
    for &target in &assignment.targets {
        match topo.unit(target).kind {
            UnitKind::Lc => shares.lc += w,
            UnitKind::Hc => shares.hc += w,
            UnitKind::Edge => shares.edge += w,
            UnitKind::Cloud => shares.cloud += w,
            UnitKind::Sne => {}
        }
    }
    shares
}

/// Input sizes and workloads of tasks whose target sits past the subnetwork
/// boundary (edge or cloud). Tasks kept on an LC or the HC stay inside the
/// subnetwork and do not count.
pub fn offload_distributions(
    assignment: &Assignment,
    tasks: &[Task],
    topo: &Topology,
) -> (Vec<f64>, Vec<f64>) {
    let mut sizes = Vec::new();
    let mut workloads = Vec::new();
    for (task, &target) in tasks.iter().zip(&assignment.targets) {
        match topo.unit(target).kind {
            UnitKind::Edge | UnitKind::Cloud => {
                sizes.push(task.size_bits);
                workloads.push(task.workload_cycles);
            }
            _ => {}
        }
    }
    (sizes, workloads)
}

/// Completion instant of the last satisfied task; 0 when nothing finished
/// on time.
pub fn makespan(records: &[ExecutionRecord]) -> f64 {
    records
        .iter()
        .filter(|r| r.on_time)
        .filter_map(|r| r.completion_s)
        .fold(0.0, f64::max)
}

/// Utilization level above which an arrival counts as saturated.
pub const SATURATION_THRESHOLD: f64 = 0.8;

/// Assemble the full per-run report. The outcome must carry a utilization
/// trace (simulate with `record_utilization`).
pub fn build_report(
    topo: &Topology,
    tasks: &[Task],
    assignment: &Assignment,
    outcome: &SimOutcome,
) -> Result<MetricsReport> {
    let trace = outcome.utilization.as_ref().ok_or_else(|| {
        Error::Metrics("utilization trace missing; simulate with record_utilization".into())
    })?;
    let ratio = satisfied_ratio(&outcome.records)?;
    let (comm, compute) = arrival_utilization(trace, tasks);
    let (offloaded_size_bits, offloaded_workload_cycles) =
        offload_distributions(assignment, tasks, topo);
    Ok(MetricsReport {
        task_count: tasks.len(),
        satisfied_count: satisfied_count(&outcome.records),
        satisfied_ratio: ratio,
        budget_samples: normalized_budgets(&outcome.records, tasks),
        comm_saturation: saturation_probability(&comm, SATURATION_THRESHOLD),
        compute_saturation: saturation_probability(&compute, SATURATION_THRESHOLD),
        shares: allocation_shares(assignment, topo),
        offloaded_size_bits,
        offloaded_workload_cycles,
        makespan_s: makespan(&outcome.records),
    })
}

/// Mean and sample standard deviation of a set of runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample (n − 1) standard deviation; NaN mean on empty input,
/// zero spread for a single sample.
pub fn stat(xs: &[f64]) -> Stat {
    if xs.is_empty() {
        return Stat { mean: f64::NAN, std: 0.0 };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    };
    Stat { mean, std }
}

/// Nearest-rank percentile of unsorted samples; `p` in (0, 100]. NaN on
/// empty input.
pub fn percentile(samples: &[f64], p: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Cross-seed summary of many [`MetricsReport`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub runs: usize,
    pub satisfied_ratio: Stat,
    pub comm_saturation: Stat,
    pub compute_saturation: Stat,
    pub share_lc: Stat,
    pub share_hc: Stat,
    pub share_edge: Stat,
    pub share_cloud: Stat,
    pub makespan_s: Stat,
    /// Pooled leftover-budget samples from every run.
    pub budget_sample_count: usize,
    /// Nearest-rank percentiles of the pooled budgets at 10%, 20%, … 100%.
    pub budget_percentiles: [f64; 10],
    pub offloaded_size_bits: Stat,
    pub offloaded_workload_cycles: Stat,
}

/// Fold per-seed reports into means, deviations, and pooled percentiles.
/// The fold is order-sensitive only through float summation, so one seed
/// list always yields one aggregate.
pub fn aggregate(reports: &[MetricsReport]) -> AggregateReport {
    let collect = |f: &dyn Fn(&MetricsReport) -> f64| -> Vec<f64> {
        reports.iter().map(f).collect()
    };
    let budgets: Vec<f64> =
        reports.iter().flat_map(|r| r.budget_samples.iter().copied()).collect();
    let sizes: Vec<f64> =
        reports.iter().flat_map(|r| r.offloaded_size_bits.iter().copied()).collect();
    let workloads: Vec<f64> =
        reports.iter().flat_map(|r| r.offloaded_workload_cycles.iter().copied()).collect();
    let mut budget_percentiles = [0.0; 10];
    for (i, slot) in budget_percentiles.iter_mut().enumerate() {
        *slot = percentile(&budgets, 10.0 * (i + 1) as f64);
    }
    AggregateReport {
        runs: reports.len(),
        satisfied_ratio: stat(&collect(&|r| r.satisfied_ratio)),
        comm_saturation: stat(&collect(&|r| r.comm_saturation)),
        compute_saturation: stat(&collect(&|r| r.compute_saturation)),
        share_lc: stat(&collect(&|r| r.shares.lc)),
        share_hc: stat(&collect(&|r| r.shares.hc)),
        share_edge: stat(&collect(&|r| r.shares.edge)),
        share_cloud: stat(&collect(&|r| r.shares.cloud)),
        makespan_s: stat(&collect(&|r| r.makespan_s)),
        budget_sample_count: budgets.len(),
        budget_percentiles,
        offloaded_size_bits: stat(&sizes),
        offloaded_workload_cycles: stat(&workloads),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Fading;
    use crate::config::ScenarioConfig;
    use crate::engine::{simulate, SimParams};
    use crate::topology::UnitId;
    use proptest::prelude::*;

    fn record(task: usize, total: f64, completion: Option<f64>, on_time: bool) -> ExecutionRecord {
        ExecutionRecord {
            task,
            uplink_s: 0.0,
            queue_s: 0.0,
            processing_s: if on_time { total } else { 0.0 },
            downlink_s: 0.0,
            total_s: total,
            completion_s: completion,
            completed: completion.is_some(),
            on_time,
        }
    }

    fn task_with_deadline(id: usize, deadline: f64) -> Task {
        Task {
            id,
            origin: UnitId(0),
            gen_time_s: 0.0,
            workload_cycles: 1e6,
            size_bits: 1e6,
            result_bits: 1.5e5,
            deadline_s: deadline,
        }
    }

    #[test]
    fn satisfied_ratio_counts_on_time_records() {
        let all: Vec<ExecutionRecord> =
            (0..45).map(|i| record(i, 0.01, Some(0.01), true)).collect();
        assert_eq!(satisfied_ratio(&all).unwrap(), 1.0);

        let mut mixed: Vec<ExecutionRecord> =
            (0..52).map(|i| record(i, 0.01, Some(0.01), true)).collect();
        mixed.extend((52..75).map(|i| record(i, 0.2, None, false)));
        let r = satisfied_ratio(&mixed).unwrap();
        assert!((r - 52.0 / 75.0).abs() < 1e-12);
        assert!((r - 0.6933).abs() < 1e-3);

        let none: Vec<ExecutionRecord> = (0..10).map(|i| record(i, 0.2, None, false)).collect();
        assert_eq!(satisfied_ratio(&none).unwrap(), 0.0);

        assert!(satisfied_ratio(&[]).is_err());
    }

    #[test]
    fn budgets_measure_leftover_deadline_fraction() {
        let tasks = vec![
            task_with_deadline(0, 0.1),
            task_with_deadline(1, 0.1),
            task_with_deadline(2, 0.1),
            task_with_deadline(3, 0.1),
        ];
        let records = vec![
            record(0, 0.1, Some(0.1), true),    // finished at the wire
            record(1, 0.04, Some(0.04), true),  // 60% budget left
            record(2, 0.0, Some(0.0), true),    // instantaneous
            record(3, 0.2, None, false),        // missed: no sample
        ];
        let budgets = normalized_budgets(&records, &tasks);
        assert_eq!(budgets.len(), 3);
        assert!((budgets[0] - 0.0).abs() < 1e-12);
        assert!((budgets[1] - 0.6).abs() < 1e-12);
        assert!((budgets[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saturation_is_a_strict_exceedance_fraction() {
        assert_eq!(saturation_probability(&[0.0, 0.0, 0.0], 0.8), 0.0);
        assert_eq!(saturation_probability(&[0.85, 0.5, 0.9, 0.7], 0.8), 0.5);
        assert_eq!(saturation_probability(&[1.0, 1.0], 1.0), 0.0);
        assert_eq!(saturation_probability(&[], 0.8), 0.0);
    }

    #[test]
    fn shares_histogram_targets_by_kind() {
        let cfg = ScenarioConfig::default();
        let topo = Topology::build(&cfg).unwrap();
        let lc = topo.units_of_kind(UnitKind::Lc).next().unwrap().id;
        let hc = topo.units_of_kind(UnitKind::Hc).next().unwrap().id;
        let edge = topo.units_of_kind(UnitKind::Edge).next().unwrap().id;
        let cloud = topo.units_of_kind(UnitKind::Cloud).next().unwrap().id;

        let all_cloud = Assignment { targets: vec![cloud; 5], rank: (0..5).collect() };
        let s = allocation_shares(&all_cloud, &topo);
        assert_eq!((s.lc, s.hc, s.edge, s.cloud), (0.0, 0.0, 0.0, 1.0));

        let mixed = Assignment { targets: vec![lc, lc, hc, edge], rank: (0..4).collect() };
        let s = allocation_shares(&mixed, &topo);
        assert_eq!((s.lc, s.hc, s.edge, s.cloud), (0.5, 0.25, 0.25, 0.0));
        assert!((s.sum() - 1.0).abs() < 1e-12);

        let empty = Assignment { targets: vec![], rank: vec![] };
        assert_eq!(allocation_shares(&empty, &topo).sum(), 0.0);
    }

    #[test]
    fn offload_samples_cover_edge_and_cloud_targets_only() {
        let cfg = ScenarioConfig::default();
        let topo = Topology::build(&cfg).unwrap();
        let hc = topo.units_of_kind(UnitKind::Hc).next().unwrap().id;
        let edge = topo.units_of_kind(UnitKind::Edge).next().unwrap().id;
        let cloud = topo.units_of_kind(UnitKind::Cloud).next().unwrap().id;
        let mut tasks: Vec<Task> = (0..3).map(|i| task_with_deadline(i, 0.1)).collect();
        tasks[0].size_bits = 1e6;
        tasks[0].workload_cycles = 2e7;
        tasks[1].size_bits = 2e6;
        tasks[1].workload_cycles = 3e7;
        tasks[2].size_bits = 4e6;
        tasks[2].workload_cycles = 5e7;

        let asg = Assignment { targets: vec![edge, hc, cloud], rank: vec![0, 1, 2] };
        let (sizes, workloads) = offload_distributions(&asg, &tasks, &topo);
        assert_eq!(sizes, vec![1e6, 4e6]);
        assert_eq!(workloads, vec![2e7, 5e7]);

        let inside = Assignment { targets: vec![hc, hc, hc], rank: vec![0, 1, 2] };
        let (sizes, workloads) = offload_distributions(&inside, &tasks, &topo);
        assert!(sizes.is_empty() && workloads.is_empty());
    }

    #[test]
    fn makespan_tracks_the_last_satisfied_completion() {
        let records = vec![
            record(0, 0.03, Some(0.05), true),
            record(1, 0.02, Some(0.09), true),
            record(2, 0.30, Some(0.30), false), // late: excluded
        ];
        assert_eq!(makespan(&records), 0.09);
        let max_total = records
            .iter()
            .filter(|r| r.on_time)
            .map(|r| r.total_s)
            .fold(0.0, f64::max);
        assert!(makespan(&records) >= max_total);
        assert_eq!(makespan(&[]), 0.0);
    }

    #[test]
    fn report_from_a_live_run_satisfies_the_field_invariants() {
        let cfg = ScenarioConfig::default();
        let topo = Topology::build(&cfg).unwrap();
        let hc = topo.units_of_kind(UnitKind::Hc).next().unwrap().id;
        let edge = topo.units_of_kind(UnitKind::Edge).next().unwrap().id;
        let tasks: Vec<Task> = (0..6)
            .map(|i| {
                let mut t = task_with_deadline(i, 0.05 + 0.005 * i as f64);
                t.gen_time_s = 0.003 * i as f64;
                t.workload_cycles = 25e6;
                t
            })
            .collect();
        let targets: Vec<UnitId> =
            (0..6).map(|i| if i % 2 == 0 { hc } else { edge }).collect();
        let asg = Assignment { targets, rank: (0..6).collect() };
        let mut params = SimParams::from_config(&cfg, Fading::seeded(40)).unwrap();
        params.record_utilization = true;
        let outcome = simulate(&topo, &tasks, &asg, &params).unwrap();
        let report = build_report(&topo, &tasks, &asg, &outcome).unwrap();

        assert_eq!(report.task_count, 6);
        assert!(report.satisfied_count <= report.task_count);
        assert!((0.0..=1.0).contains(&report.satisfied_ratio));
        let identity = report.satisfied_ratio * report.task_count as f64;
        assert!((identity - report.satisfied_count as f64).abs() < 1e-9);
        assert_eq!(report.budget_samples.len(), report.satisfied_count);
        for &b in &report.budget_samples {
            assert!((0.0..=1.0).contains(&b), "budget sample {b} out of range");
        }
        assert!((report.shares.sum() - 1.0).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&report.comm_saturation));
        assert!((0.0..=1.0).contains(&report.compute_saturation));
        assert_eq!(report.offloaded_size_bits.len(), 3);
        let max_total = outcome
            .records
            .iter()
            .filter(|r| r.on_time)
            .map(|r| r.total_s)
            .fold(0.0, f64::max);
        assert!(report.makespan_s >= max_total);

        // Without a trace the report cannot be built.
        let mut bare = params.clone();
        bare.record_utilization = false;
        let no_trace = simulate(&topo, &tasks, &asg, &bare).unwrap();
        assert!(build_report(&topo, &tasks, &asg, &no_trace).is_err());
    }

    #[test]
    fn stat_and_percentile_match_hand_values() {
        let s = stat(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(stat(&[5.0]).std, 0.0);
        assert!(stat(&[]).mean.is_nan());

        let deciles: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        assert_eq!(percentile(&deciles, 10.0), 0.1);
        assert_eq!(percentile(&deciles, 15.0), 0.2);
        assert_eq!(percentile(&deciles, 100.0), 1.0);
        assert!(percentile(&[], 50.0).is_nan());
    }

    #[test]
    fn aggregate_is_deterministic_and_pools_samples() {
        let base = MetricsReport {
            task_count: 4,
            satisfied_count: 3,
            satisfied_ratio: 0.75,
            budget_samples: vec![0.2, 0.4, 0.9],
            comm_saturation: 0.25,
            compute_saturation: 0.5,
            shares: Shares { lc: 0.5, hc: 0.25, edge: 0.25, cloud: 0.0 },
            offloaded_size_bits: vec![1e6],
            offloaded_workload_cycles: vec![2e7],
            makespan_s: 0.08,
        };
        let mut second = base.clone();
        second.satisfied_ratio = 0.25;
        second.budget_samples = vec![0.1];
        let reports = vec![base.clone(), second.clone()];

        let a = aggregate(&reports);
        let b = aggregate(&vec![base, second]);
        assert_eq!(a, b);
        assert_eq!(a.runs, 2);
        assert_eq!(a.satisfied_ratio.mean, 0.5);
        assert_eq!(a.budget_sample_count, 4);
        assert_eq!(a.budget_percentiles[9], 0.9);
        assert_eq!(a.offloaded_size_bits.mean, 1e6);

        let empty = aggregate(&[]);
        assert_eq!(empty.runs, 0);
        assert!(empty.satisfied_ratio.mean.is_nan());
        assert!(empty.budget_percentiles[0].is_nan());
    }

    proptest! {
        #[test]
        fn budgets_stay_normalized(
            totals in proptest::collection::vec(0.0f64..0.1, 1..20),
        ) {
            let tasks: Vec<Task> =
                (0..totals.len()).map(|i| task_with_deadline(i, 0.1)).collect();
            let records: Vec<ExecutionRecord> = totals
                .iter()
                .enumerate()
                .map(|(i, &t)| record(i, t, Some(t), true))
                .collect();
            for b in normalized_budgets(&records, &tasks) {
                prop_assert!((0.0..=1.0).contains(&b));
            }
        }

        #[test]
        fn shares_sum_to_one_for_any_nonempty_assignment(
            picks in proptest::collection::vec(0usize..4, 1..40),
        ) {
            let cfg = ScenarioConfig::default();
            let topo = Topology::build(&cfg).unwrap();
            let kinds =
                [UnitKind::Lc, UnitKind::Hc, UnitKind::Edge, UnitKind::Cloud];
            let targets: Vec<UnitId> = picks
                .iter()
                .map(|&k| topo.units_of_kind(kinds[k]).next().unwrap().id)
                .collect();
            let rank: Vec<usize> = (0..targets.len()).collect();
            let asg = Assignment { targets, rank };
            let s = allocation_shares(&asg, &topo);
            prop_assert!((s.sum() - 1.0).abs() < 1e-9);
        }
    }
}
