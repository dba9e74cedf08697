//! Experiment orchestration: single runs, parameter sweeps, oracle
//! comparisons, and the CSV tables everything lands in.
//!
//! One master seed expands into four independent streams (task generation,
//! solver, training fading, evaluation fading), so a run is replayable
//! component by component. Solving happens against the training channel;
//! the reported metrics come from a second simulation on the evaluation
//! channel with invariant checking and utilization recording switched on.
//!
//! Sweeps span task count × SINR × scheme. Each cell is identified by its
//! resolved-config fingerprint; output tables are append-only and
//! deduplicated on (fingerprint, seed), so re-running a finished sweep
//! changes nothing and a widened seed list only adds the new rows.
//! `aggregate.csv` is always rebuilt from the on-disk per-seed tables,
//! which keeps fresh and resumed runs byte-identical.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::Fading;
use crate::config::{ScenarioConfig, Scheme, SeedStreams};
use crate::engine::{simulate, SimOutcome, SimParams, TraceEvent};
use crate::metrics::{self, MetricsReport};
use crate::objective::{check_constraints, ConstraintReport, ObjectiveKind};
use crate::solvers::{exhaustive_oracle, ga_solve, random_allocate, SolveContext, SolveOutcome};
use crate::taskgen::{generate_tasks, write_table, Task};
use crate::topology::Topology;
use crate::{Error, Result};

/// What each scheme minimizes. The random baseline does not search, but its
/// reported fitness uses the deadline objective so the three schemes share
/// a scale.
pub fn scheme_objective(scheme: Scheme) -> ObjectiveKind {
    match scheme {
        Scheme::Deterministic | Scheme::Random => ObjectiveKind::DeadlineMiss,
        Scheme::Benchmark => ObjectiveKind::TotalLatency,
    }
}

/// Everything produced for one master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub tasks: Vec<Task>,
    pub solve: SolveOutcome,
    pub outcome: SimOutcome,
    pub report: MetricsReport,
}

/// Run one seed end to end against a prebuilt topology.
pub fn run_seed(
    topo: &Topology,
    cfg: &ScenarioConfig,
    seed: u64,
    record_events: bool,
) -> Result<SeedResult> {
    let streams = SeedStreams::derive(seed);
    let mut task_rng = ChaCha8Rng::seed_from_u64(streams.task_gen);
    let tasks = generate_tasks(&cfg.tasks, topo, &mut task_rng)?;

    let training = SimParams::from_config(cfg, Fading::seeded(streams.training_fading))?;
    let kind = scheme_objective(cfg.scheme);
    let ctx = SolveContext::new(topo, &tasks, kind, &training, cfg.penalty.miss_penalty)?;
    let mut solver_rng = ChaCha8Rng::seed_from_u64(streams.solver);
    let solve = match cfg.scheme {
        Scheme::Deterministic | Scheme::Benchmark => ga_solve(&ctx, &cfg.ga, &mut solver_rng)?,
        Scheme::Random => {
            let assignment = random_allocate(&ctx, &mut solver_rng);
            let fitness = ctx.fitness(&assignment)?;
            SolveOutcome { assignment, fitness, trace: vec![], evaluations: 1 }
        }
    };

    let mut evaluation = SimParams::from_config(
        cfg,
        Fading::seeded(streams.scoring_fading(cfg.clairvoyant_fading)),
    )?;
    evaluation.check_invariants = true;
    evaluation.record_utilization = true;
    evaluation.record_events = record_events;
    let outcome = simulate(topo, &tasks, &solve.assignment, &evaluation)?;
    let report = metrics::build_report(topo, &tasks, &solve.assignment, &outcome)?;
    Ok(SeedResult { seed, tasks, solve, outcome, report })
}

/// One configuration over every configured seed, plus the aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub fingerprint: String,
    pub per_seed: Vec<SeedResult>,
    pub aggregate: metrics::AggregateReport,
}

/// Validate, then run every seed of the config (seeds run concurrently,
/// results in seed-list order).
pub fn run(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seeds: at least one seed is required".into()));
    }
    let topo = Topology::build(cfg)?;
    let per_seed: Vec<SeedResult> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(&topo, cfg, seed, false))
        .collect::<Result<_>>()?;
    let reports: Vec<MetricsReport> = per_seed.iter().map(|s| s.report.clone()).collect();
    Ok(RunResult {
        fingerprint: cfg.fingerprint(),
        per_seed,
        aggregate: metrics::aggregate(&reports),
    })
}

/// Sweep axes: the Cartesian product of these values defines the cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    pub task_counts: Vec<usize>,
    pub sinrs_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
}

impl SweepAxes {
    fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("task axis", self.task_counts.is_empty()),
            ("sinr axis", self.sinrs_db.is_empty()),
            ("scheme axis", self.schemes.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("sweep: {name} must not be empty")));
            }
        }
        Ok(())
    }
}

/// Base config specialized to one sweep cell. A single SINR axis value sets
/// both wireless pools.
fn cell_config(
    base: &ScenarioConfig,
    scheme: Scheme,
    task_count: usize,
    sinr_db: f64,
) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.scheme = scheme;
    cfg.tasks.count = task_count;
    cfg.topology.intra_sinr_db = sinr_db;
    cfg.topology.parent_sinr_db = sinr_db;
    cfg
}

/// One completed sweep cell: its resolved config, the seeds computed in
/// this invocation, and the seeds skipped because the output tables already
/// held them.
#[derive(Debug)]
pub struct SweepCell {
    pub config: ScenarioConfig,
    pub fingerprint: String,
    pub new_seeds: Vec<SeedResult>,
    pub skipped_seeds: Vec<u64>,
}

/// A cell that errored; the sweep carries on without it.
#[derive(Debug)]
pub struct SweepFailure {
    pub scheme: Scheme,
    pub task_count: usize,
    pub sinr_db: f64,
    pub error: String,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub cells: Vec<SweepCell>,
    pub failures: Vec<SweepFailure>,
}

/// Run the full grid into `out_dir`, resuming whatever the directory
/// already holds.
pub fn sweep(base: &ScenarioConfig, axes: &SweepAxes, out_dir: &Path) -> Result<SweepOutcome> {
    base.validate()?;
    axes.validate()?;
    if base.seeds.is_empty() {
        return Err(Error::Config("seeds: at least one seed is required".into()));
    }
    let done = existing_keys(&out_dir.join("metrics.csv"))?;

    let mut specs = Vec::new();
    for &task_count in &axes.task_counts {
        for &sinr_db in &axes.sinrs_db {
            for &scheme in &axes.schemes {
                specs.push((scheme, task_count, sinr_db));
            }
        }
    }

    let results: Vec<std::result::Result<SweepCell, SweepFailure>> = specs
        .par_iter()
        .map(|&(scheme, task_count, sinr_db)| {
            let cfg = cell_config(base, scheme, task_count, sinr_db);
            run_cell(&cfg, &done).map_err(|e| SweepFailure {
                scheme,
                task_count,
                sinr_db,
                error: e.to_string(),
            })
        })
        .collect();

    let mut outcome = SweepOutcome { cells: Vec::new(), failures: Vec::new() };
    for r in results {
        match r {
            Ok(cell) => outcome.cells.push(cell),
            Err(failure) => outcome.failures.push(failure),
        }
    }

    let views: Vec<CellView<'_>> = outcome
        .cells
        .iter()
        .map(|c| CellView {
            config: &c.config,
            fingerprint: &c.fingerprint,
            seeds: &c.new_seeds,
        })
        .collect();
    write_outputs(out_dir, base, &views)?;
    Ok(outcome)
}

fn run_cell(cfg: &ScenarioConfig, done: &HashSet<(String, u64)>) -> Result<SweepCell> {
    cfg.validate()?;
    let fingerprint = cfg.fingerprint();
    let topo = Topology::build(cfg)?;
    let mut pending = Vec::new();
    let mut skipped_seeds = Vec::new();
    for &seed in &cfg.seeds {
        if done.contains(&(fingerprint.clone(), seed)) {
            skipped_seeds.push(seed);
        } else {
            pending.push(seed);
        }
    }
    let new_seeds: Vec<SeedResult> = pending
        .par_iter()
        .map(|&seed| run_seed(&topo, cfg, seed, false))
        .collect::<Result<_>>()?;
    Ok(SweepCell { config: cfg.clone(), fingerprint, new_seeds, skipped_seeds })
}

/// Borrowed view of one cell for the table writers.
pub struct CellView<'a> {
    pub config: &'a ScenarioConfig,
    pub fingerprint: &'a str,
    pub seeds: &'a [SeedResult],
}

const METRICS_HEADER: &str = "fingerprint,scheme,task_count,intra_sinr_db,parent_sinr_db,seed,\
satisfied_count,satisfied_ratio,comm_saturation,compute_saturation,\
share_lc,share_hc,share_edge,share_cloud,offloaded_count,\
offloaded_size_mean_bits,offloaded_workload_mean_cycles,makespan_s,fitness,evaluations";

const BUDGET_HEADER: &str =
    "fingerprint,scheme,task_count,intra_sinr_db,parent_sinr_db,seed,task,budget";

const TRACE_HEADER: &str =
    "fingerprint,scheme,task_count,intra_sinr_db,parent_sinr_db,seed,generation,best_fitness";

const AGGREGATE_HEADER: &str = "fingerprint,scheme,task_count,intra_sinr_db,parent_sinr_db,runs,\
satisfied_ratio_mean,satisfied_ratio_std,comm_saturation_mean,comm_saturation_std,\
compute_saturation_mean,compute_saturation_std,share_lc_mean,share_hc_mean,share_edge_mean,\
share_cloud_mean,makespan_mean_s,makespan_std_s,budget_sample_count,\
budget_p10,budget_p20,budget_p30,budget_p40,budget_p50,budget_p60,budget_p70,budget_p80,\
budget_p90,budget_p100,offloaded_size_mean_bits,offloaded_workload_mean_cycles";

fn mean_or_nan(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn cell_prefix(view: &CellView<'_>) -> String {
    let t = &view.config.topology;
    format!(
        "{},{},{},{},{}",
        view.fingerprint,
        view.config.scheme,
        view.config.tasks.count,
        t.intra_sinr_db,
        t.parent_sinr_db
    )
}

/// (fingerprint, seed) pairs already present in a per-seed table.
fn existing_keys(path: &Path) -> Result<HashSet<(String, u64)>> {
    let mut keys = HashSet::new();
    if !path.exists() {
        return Ok(keys);
    }
    let text = fs::read_to_string(path)?;
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        let fingerprint = cols.next().unwrap_or_default().to_string();
        let seed: u64 = cols.nth(4).unwrap_or_default().parse().map_err(|_| {
            Error::Metrics(format!("unparseable seed column in {}", path.display()))
        })?;
        keys.insert((fingerprint, seed));
    }
    Ok(keys)
}

/// Append `rows` (already formatted, no trailing newline) to a CSV,
/// creating it with `header` first; rows whose (fingerprint, seed) key the
/// file already holds are dropped.
fn append_rows(path: &Path, header: &str, rows: &[(String, u64, String)]) -> Result<()> {
    let done = existing_keys(path)?;
    let mut text = if path.exists() {
        fs::read_to_string(path)?
    } else {
        format!("{header}\n")
    };
    for (fingerprint, seed, row) in rows {
        if !done.contains(&(fingerprint.clone(), *seed)) {
            text.push_str(row);
            text.push('\n');
        }
    }
    fs::write(path, text)?;
    Ok(())
}

/// Write/refresh every output table for the given cells. Per-seed tables
/// are append-only; `aggregate.csv` is rebuilt from them; the manifest
/// records tool, version, fingerprints, and the fully resolved base config.
pub fn write_outputs(out_dir: &Path, base: &ScenarioConfig, cells: &[CellView<'_>]) -> Result<()> {
    fs::create_dir_all(out_dir)?;

    let mut metric_rows = Vec::new();
    let mut budget_rows = Vec::new();
    let mut trace_rows = Vec::new();
    for view in cells {
        let prefix = cell_prefix(view);
        for sr in view.seeds {
            let r = &sr.report;
            let mut row = format!("{prefix},{}", sr.seed);
            write!(
                row,
                ",{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.satisfied_count,
                r.satisfied_ratio,
                r.comm_saturation,
                r.compute_saturation,
                r.shares.lc,
                r.shares.hc,
                r.shares.edge,
                r.shares.cloud,
                r.offloaded_size_bits.len(),
                mean_or_nan(&r.offloaded_size_bits),
                mean_or_nan(&r.offloaded_workload_cycles),
                r.makespan_s,
                sr.solve.fitness,
                sr.solve.evaluations,
            )
            .expect("write to string");
            metric_rows.push((view.fingerprint.to_string(), sr.seed, row));

            let mut budget_lines = String::new();
            for (rec, task) in sr.outcome.records.iter().zip(&sr.tasks) {
                if rec.on_time {
                    let b = (task.deadline_s - rec.total_s) / task.deadline_s;
                    writeln!(budget_lines, "{prefix},{},{},{}", sr.seed, task.id, b)
                        .expect("write to string");
                }
            }
            if !budget_lines.is_empty() {
                budget_lines.pop();
                budget_rows.push((view.fingerprint.to_string(), sr.seed, budget_lines));
            }

            if !sr.solve.trace.is_empty() {
                let mut trace_lines = String::new();
                for (generation, best) in sr.solve.trace.iter().enumerate() {
                    writeln!(trace_lines, "{prefix},{},{generation},{best}", sr.seed)
                        .expect("write to string");
                }
                trace_lines.pop();
                trace_rows.push((view.fingerprint.to_string(), sr.seed, trace_lines));
            }
        }
    }

    append_rows(&out_dir.join("metrics.csv"), METRICS_HEADER, &metric_rows)?;
    append_rows(&out_dir.join("budget_samples.csv"), BUDGET_HEADER, &budget_rows)?;
    append_rows(&out_dir.join("ga_trace.csv"), TRACE_HEADER, &trace_rows)?;
    rebuild_aggregate(out_dir)?;

    let mut manifest = format!(
        "tool = \"{}\"\nversion = \"{}\"\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION")
    );
    for view in cells {
        let t = &view.config.topology;
        manifest.push_str(&format!(
            "\n[[cell]]\nfingerprint = \"{}\"\nscheme = \"{}\"\ntask_count = {}\n\
             intra_sinr_db = {}\nparent_sinr_db = {}\nseeds = {:?}\n",
            view.fingerprint,
            view.config.scheme,
            view.config.tasks.count,
            t.intra_sinr_db,
            t.parent_sinr_db,
            view.config.seeds,
        ));
    }
    fs::write(out_dir.join("manifest.toml"), manifest)?;
    fs::write(out_dir.join("config.resolved.toml"), base.to_toml_string())?;
    Ok(())
}

/// Recompute `aggregate.csv` from the per-seed tables on disk, grouping by
/// fingerprint in first-appearance order.
fn rebuild_aggregate(out_dir: &Path) -> Result<()> {
    let metrics_path = out_dir.join("metrics.csv");
    if !metrics_path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(&metrics_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        _ => {
            return Err(Error::Metrics(format!(
                "unrecognized metrics.csv schema in {}",
                metrics_path.display()
            )))
        }
    }

    struct Group {
        prefix: String,
        ratios: Vec<f64>,
        comm: Vec<f64>,
        compute: Vec<f64>,
        shares: [Vec<f64>; 4],
        makespans: Vec<f64>,
        offl_sizes: Vec<f64>,
        offl_workloads: Vec<f64>,
        budgets: Vec<f64>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Group> = std::collections::HashMap::new();

    let field = |cols: &[&str], i: usize, name: &str| -> Result<f64> {
        cols.get(i)
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Metrics(format!("metrics.csv: bad {name} column")))
    };
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 20 {
            return Err(Error::Metrics("metrics.csv: wrong column count".into()));
        }
        let fingerprint = cols[0].to_string();
        let group = groups.entry(fingerprint.clone()).or_insert_with(|| {
            order.push(fingerprint.clone());
            Group {
                prefix: cols[..5].join(","),
                ratios: Vec::new(),
                comm: Vec::new(),
                compute: Vec::new(),
                shares: Default::default(),
                makespans: Vec::new(),
                offl_sizes: Vec::new(),
                offl_workloads: Vec::new(),
                budgets: Vec::new(),
            }
        });
        group.ratios.push(field(&cols, 7, "satisfied_ratio")?);
        group.comm.push(field(&cols, 8, "comm_saturation")?);
        group.compute.push(field(&cols, 9, "compute_saturation")?);
        for (k, slot) in group.shares.iter_mut().enumerate() {
            slot.push(field(&cols, 10 + k, "share")?);
        }
        let size_mean = field(&cols, 15, "offloaded_size_mean_bits")?;
        if !size_mean.is_nan() {
            group.offl_sizes.push(size_mean);
        }
        let workload_mean = field(&cols, 16, "offloaded_workload_mean_cycles")?;
        if !workload_mean.is_nan() {
            group.offl_workloads.push(workload_mean);
        }
        group.makespans.push(field(&cols, 17, "makespan_s")?);
    }

    let budget_path = out_dir.join("budget_samples.csv");
    if budget_path.exists() {
        let text = fs::read_to_string(&budget_path)?;
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 8 {
                return Err(Error::Metrics("budget_samples.csv: wrong column count".into()));
            }
            if let Some(group) = groups.get_mut(cols[0]) {
                group.budgets.push(field(&cols, 7, "budget")?);
            }
        }
    }

    let mut out = format!("{AGGREGATE_HEADER}\n");
    for fingerprint in &order {
        let g = &groups[fingerprint];
        let ratio = metrics::stat(&g.ratios);
        let comm = metrics::stat(&g.comm);
        let compute = metrics::stat(&g.compute);
        let makespan = metrics::stat(&g.makespans);
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            g.prefix,
            g.ratios.len(),
            ratio.mean,
            ratio.std,
            comm.mean,
            comm.std,
            compute.mean,
            compute.std,
            mean_or_nan(&g.shares[0]),
            mean_or_nan(&g.shares[1]),
            mean_or_nan(&g.shares[2]),
            mean_or_nan(&g.shares[3]),
            makespan.mean,
        )
        .expect("write to string");
        write!(out, ",{},{}", makespan.std, g.budgets.len()).expect("write to string");
        for decile in 1..=10 {
            let p = metrics::percentile(&g.budgets, 10.0 * decile as f64);
            write!(out, ",{p}").expect("write to string");
        }
        writeln!(
            out,
            ",{},{}",
            mean_or_nan(&g.offl_sizes),
            mean_or_nan(&g.offl_workloads)
        )
        .expect("write to string");
    }
    fs::write(out_dir.join("aggregate.csv"), out)?;
    Ok(())
}

/// Write one seed's task table and lifecycle event log (requires a run
/// made with event recording).
pub fn write_trace_files(out_dir: &Path, sr: &SeedResult, suffix: &str) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(format!("tasks{suffix}.csv")), write_table(&sr.tasks))?;
    let mut out = String::from("t_s,event,task,detail\n");
    for e in &sr.outcome.events {
        let (name, task, detail) = match *e {
            TraceEvent::Activated { task, .. } => ("activated", task, String::new()),
            TraceEvent::HopCompleted { task, link, .. } => {
                ("hop_completed", task, format!("link {}", link.0))
            }
            TraceEvent::ArrivedAtTarget { task, unit, .. } => {
                ("arrived_at_target", task, unit.to_string())
            }
            TraceEvent::ServiceStarted { task, unit, .. } => {
                ("service_started", task, unit.to_string())
            }
            TraceEvent::ServiceCompleted { task, unit, .. } => {
                ("service_completed", task, unit.to_string())
            }
            TraceEvent::Completed { task, on_time, .. } => {
                ("completed", task, if on_time { "on time" } else { "late" }.to_string())
            }
            TraceEvent::Killed { task, .. } => ("killed", task, String::new()),
        };
        writeln!(out, "{},{name},{task},{detail}", e.time_s()).expect("write to string");
    }
    fs::write(out_dir.join(format!("trace{suffix}.csv")), out)?;
    Ok(())
}

/// One seed's exact-versus-genetic comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub seed: u64,
    pub oracle_fitness: f64,
    pub ga_fitness: f64,
    /// Fitnesses agree to 1e-9.
    pub matched: bool,
}

/// Compare the genetic solver against exhaustive search on every seed.
/// Both score against the same training channel, so any fitness gap is the
/// search's fault, not luck.
pub fn oracle_check(cfg: &ScenarioConfig) -> Result<Vec<OracleRow>> {
    cfg.validate()?;
    if cfg.scheme == Scheme::Random {
        return Err(Error::Config(
            "oracle check compares the genetic solver; use the deterministic or benchmark scheme"
                .into(),
        ));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::Config("seeds: at least one seed is required".into()));
    }
    let topo = Topology::build(cfg)?;
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let streams = SeedStreams::derive(seed);
            let mut task_rng = ChaCha8Rng::seed_from_u64(streams.task_gen);
            let tasks = generate_tasks(&cfg.tasks, &topo, &mut task_rng)?;
            let training =
                SimParams::from_config(cfg, Fading::seeded(streams.training_fading))?;
            let kind = scheme_objective(cfg.scheme);
            let ctx =
                SolveContext::new(&topo, &tasks, kind, &training, cfg.penalty.miss_penalty)?;
            let oracle = exhaustive_oracle(&ctx, cfg.oracle_budget)?;
            let mut solver_rng = ChaCha8Rng::seed_from_u64(streams.solver);
            let ga = ga_solve(&ctx, &cfg.ga, &mut solver_rng)?;
            Ok(OracleRow {
                seed,
                oracle_fitness: oracle.fitness,
                ga_fitness: ga.fitness,
                matched: (ga.fitness - oracle.fitness).abs() <= 1e-9,
            })
        })
        .collect()
}

/// Run every seed and audit the full constraint set on each evaluation run.
pub fn constraint_check(cfg: &ScenarioConfig) -> Result<Vec<(u64, ConstraintReport)>> {
    let result = run(cfg)?;
    let topo = Topology::build(cfg)?;
    result
        .per_seed
        .iter()
        .map(|sr| {
            let report =
                check_constraints(&topo, &sr.tasks, &sr.solve.assignment, &sr.outcome)?;
            Ok((sr.seed, report))
        })
        .collect()
}
