//! Acceptance gate: ten end-to-end checks covering formula exactness, oracle
//! equivalence, scheme ordering, trend directions, resource saturation,
//! offloading behaviour, conservation invariants, determinism, and runtime.
//!
//! Each test prints one `criterion N (name): PASS/FAIL — evidence` line; run
//! with `cargo test --test acceptance -- --nocapture` to see all of them.
//! Criteria 3–7 share one 18-cell evaluation grid built on first use.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use detoff::channel::resource_rate;
use detoff::config::{ScenarioConfig, Scheme};
use detoff::engine::{processing_time, simulate, SimParams};
use detoff::metrics::percentile;
use detoff::objective::{step_penalty, ObjectiveKind};
use detoff::runner::{oracle_check, run, sweep, SweepAxes};
use detoff::solvers::random_allocate;
use detoff::solvers::SolveContext;
use detoff::taskgen::generate_tasks;
use detoff::topology::Topology;

/// Print the verdict line for one criterion, then enforce it.
fn verdict(num: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {num} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    assert!(pass, "{line}");
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn frac_below(xs: &[f64], cut: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().filter(|&&x| x < cut).count() as f64 / xs.len() as f64
}

// ---------------------------------------------------------------------------
// Shared evaluation grid: 10 SNEs, 2 LCs, 1 HC, 1 edge, 1 cloud;
// {10, 20, 30} tasks x {3, 27} dB x all three schemes, 50 seeds per cell.
//
// The task mix is sized so the two SINR points probe genuinely different
// operating regimes: at 27 dB every placement is reachable and the search
// trades queueing against radio time, while at 3 dB only short paths fit
// inside a deadline and offloading past the subnetwork is rarely viable.
// ---------------------------------------------------------------------------

const GRID_TASKS: [usize; 3] = [10, 20, 30];
const GRID_SINRS: [i32; 2] = [3, 27];
const GRID_SEEDS: u64 = 50;
const GRID_SIZE_BITS: (f64, f64) = (100.0e3, 600.0e3);
const GRID_DEADLINE_S: (f64, f64) = (0.05, 0.15);

fn grid_config(task_count: usize, sinr_db: f64, scheme: Scheme) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.scheme = scheme;
    cfg.seeds = (1..=GRID_SEEDS).collect();
    cfg.topology.sne_count = 10;
    cfg.topology.lc_count = 2;
    cfg.topology.intra_sinr_db = sinr_db;
    cfg.topology.parent_sinr_db = sinr_db;
    cfg.tasks.count = task_count;
    cfg.tasks.size_bits = GRID_SIZE_BITS;
    cfg.tasks.deadline_s = GRID_DEADLINE_S;
    cfg.ga.population = 200;
    cfg.ga.generations = 10;
    cfg
}

#[derive(Default)]
struct Cell {
    /// Per-seed satisfied-task ratios.
    ratios: Vec<f64>,
    /// Per-seed saturation probabilities.
    comm_sat: Vec<f64>,
    compute_sat: Vec<f64>,
    /// Per-seed fraction of tasks placed on the edge or cloud.
    offload_share: Vec<f64>,
    /// Per-seed flag: every task satisfied.
    full: Vec<bool>,
    /// Pooled normalized-budget samples over all seeds.
    budgets: Vec<f64>,
    /// Pooled input sizes of edge/cloud-targeted tasks over all seeds.
    offload_sizes: Vec<f64>,
}

struct Grid {
    cells: Vec<((usize, i32, Scheme), Cell)>,
    build_s: f64,
}

fn grid() -> &'static Grid {
    static GRID: OnceLock<Grid> = OnceLock::new();
    GRID.get_or_init(|| {
        let start = Instant::now();
        let mut cells = Vec::new();
        for &n in &GRID_TASKS {
            for &sinr in &GRID_SINRS {
                for &scheme in &Scheme::ALL {
                    let cfg = grid_config(n, sinr as f64, scheme);
                    let result = run(&cfg).expect("grid cell");
                    let mut cell = Cell::default();
                    for sr in &result.per_seed {
                        let r = &sr.report;
                        cell.ratios.push(r.satisfied_ratio);
                        cell.comm_sat.push(r.comm_saturation);
                        cell.compute_sat.push(r.compute_saturation);
                        cell.offload_share.push(r.shares.edge + r.shares.cloud);
                        cell.full.push(r.satisfied_count == r.task_count);
                        cell.budgets.extend_from_slice(&r.budget_samples);
                        cell.offload_sizes.extend_from_slice(&r.offloaded_size_bits);
                    }
                    cells.push(((n, sinr, scheme), cell));
                }
            }
        }
        Grid { cells, build_s: start.elapsed().as_secs_f64() }
    })
}

fn cell(task_count: usize, sinr_db: i32, scheme: Scheme) -> &'static Cell {
    &grid()
        .cells
        .iter()
        .find(|(key, _)| *key == (task_count, sinr_db, scheme))
        .expect("grid cell present")
        .1
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_formula_exactness() {
    let start = Instant::now();

    let proc = processing_time(50.0e6, 2.5e9);
    let proc_ok = proc == 0.020;

    let rate = resource_rate(360.0e3, 1000.0, 0.0);
    let closed_form = 360.0e3 * 1001.0f64.log2();
    let rate_ok = ((rate - closed_form) / closed_form).abs() <= 1e-9
        && (rate / 1.0e6 * 1000.0).round() / 1000.0 == 3.588;

    let step_ok = step_penalty(0.5, 100.0) == 0.0
        && step_penalty(1.0, 100.0) == 0.0
        && step_penalty(1.2, 100.0) == 100.0;

    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        1,
        "formula exactness",
        proc_ok && rate_ok && step_ok && elapsed < 1.0,
        &format!(
            "50 Mcycles @ 2.5 GHz = {:.3} ms; one 360 kHz resource @ SINR 1000 = {:.6} Mbit/s; \
             step penalty (0.5, 1.0, 1.2) = ({}, {}, {}); {:.3} s",
            proc * 1e3,
            rate / 1e6,
            step_penalty(0.5, 100.0),
            step_penalty(1.0, 100.0),
            step_penalty(1.2, 100.0),
            elapsed
        ),
    );
}

/// Small-instance family where brute force is tractable: every task starts
/// at the hub, so each chooses among 3 computing units, and the shrunken
/// bandwidth pools hold 4 resources each.
fn oracle_config(task_count: usize, seeds: Vec<u64>) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.seeds = seeds;
    cfg.topology.sne_count = 4;
    cfg.topology.lc_count = 1;
    cfg.topology.intra_pool_bandwidth_hz = 1.44e6;
    cfg.topology.parent_pool_bandwidth_hz = 1.44e6;
    cfg.tasks.count = task_count;
    cfg.tasks.sne_share = 0.0;
    cfg.tasks.lc_share = 0.0;
    cfg.tasks.hc_share = 1.0;
    cfg.tasks.size_bits = (50.0e3, 300.0e3);
    cfg.tasks.deadline_s = (0.03, 0.10);
    cfg.ga.population = 200;
    cfg.ga.generations = 20;
    cfg
}

#[test]
fn criterion_02_oracle_equivalence() {
    let start = Instant::now();
    let mut rows = Vec::new();
    for (count, lo, hi) in [(3, 0, 34), (4, 34, 67), (5, 67, 100)] {
        let cfg = oracle_config(count, (lo..hi).collect());
        rows.extend(oracle_check(&cfg).expect("oracle comparison"));
    }
    let matched = rows.iter().filter(|r| r.matched).count();
    let beats = rows
        .iter()
        .filter(|r| r.ga_fitness < r.oracle_fitness - 1e-9)
        .count();
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        2,
        "oracle equivalence",
        rows.len() == 100 && matched >= 95 && beats == 0 && elapsed < 300.0,
        &format!(
            "{matched}/{} instances matched, {beats} beat the oracle; {:.1} s",
            rows.len(),
            elapsed
        ),
    );
}

#[test]
fn criterion_03_scheme_ordering() {
    let mut worst_gap = f64::INFINITY;
    let mut worst_at = String::new();
    let mut ordered = true;
    for &n in &GRID_TASKS {
        for &s in &GRID_SINRS {
            let det = mean(&cell(n, s, Scheme::Deterministic).ratios);
            let bench = mean(&cell(n, s, Scheme::Benchmark).ratios);
            let rand = mean(&cell(n, s, Scheme::Random).ratios);
            ordered &= det >= bench && bench >= rand;
            let gap = (det - bench).min(bench - rand);
            if gap < worst_gap {
                worst_gap = gap;
                worst_at = format!(
                    "({n} tasks, {s} dB): det {det:.3} / bench {bench:.3} / random {rand:.3}"
                );
            }
        }
    }
    let build_s = grid().build_s;
    verdict(
        3,
        "scheme ordering",
        ordered && build_s < 1800.0,
        &format!("tightest point {worst_at}; grid built in {build_s:.0} s"),
    );
}

#[test]
fn criterion_04_monotonicity() {
    const TOL: f64 = 0.02;
    let mut ok = true;
    let mut worst = String::from("all adjacent pairs within tolerance");
    let mut worst_slack = f64::INFINITY;
    for &scheme in &Scheme::ALL {
        for &s in &GRID_SINRS {
            for pair in GRID_TASKS.windows(2) {
                let lo = mean(&cell(pair[0], s, scheme).ratios);
                let hi = mean(&cell(pair[1], s, scheme).ratios);
                let slack = lo + TOL - hi;
                if slack < worst_slack {
                    worst_slack = slack;
                    worst = format!(
                        "{scheme} @ {s} dB: ratio({}) {lo:.3} -> ratio({}) {hi:.3}",
                        pair[0], pair[1]
                    );
                }
                ok &= hi <= lo + TOL;
            }
        }
        for &n in &GRID_TASKS {
            let low = mean(&cell(n, GRID_SINRS[0], scheme).ratios);
            let high = mean(&cell(n, GRID_SINRS[1], scheme).ratios);
            let slack = high + TOL - low;
            if slack < worst_slack {
                worst_slack = slack;
                worst = format!(
                    "{scheme} @ {n} tasks: ratio(3 dB) {low:.3} -> ratio(27 dB) {high:.3}"
                );
            }
            ok &= high >= low - TOL;
        }
    }
    verdict(4, "monotonicity", ok, &format!("tightest pair: {worst}"));
}

#[test]
fn criterion_05_time_budget_contrast() {
    let mut qualifying = 0;
    let mut best_gap = f64::NEG_INFINITY;
    let mut best_at = String::from("no grid point had both schemes at 90%");
    for &n in &GRID_TASKS {
        for &s in &GRID_SINRS {
            let det = cell(n, s, Scheme::Deterministic);
            let bench = cell(n, s, Scheme::Benchmark);
            if mean(&det.ratios) < 0.90 || mean(&bench.ratios) < 0.90 {
                continue;
            }
            qualifying += 1;
            let gap = frac_below(&bench.budgets, 0.6) - frac_below(&det.budgets, 0.6);
            if gap > best_gap {
                best_gap = gap;
                best_at = format!(
                    "({n} tasks, {s} dB): bench {:.3} vs det {:.3} below 0.6",
                    frac_below(&bench.budgets, 0.6),
                    frac_below(&det.budgets, 0.6)
                );
            }
        }
    }

    let mut strict_wins = 0usize;
    let mut win_at = String::from("none");
    for &n in &GRID_TASKS {
        for &s in &GRID_SINRS {
            let det = cell(n, s, Scheme::Deterministic);
            let bench = cell(n, s, Scheme::Benchmark);
            for i in 0..det.full.len() {
                if det.full[i] && !bench.full[i] {
                    if strict_wins == 0 {
                        win_at = format!("({n} tasks, {s} dB, seed {})", i + 1);
                    }
                    strict_wins += 1;
                }
            }
        }
    }

    verdict(
        5,
        "time-budget contrast",
        qualifying > 0 && best_gap >= 0.05 && strict_wins > 0,
        &format!(
            "{qualifying} qualifying points; best gap {:.1} pp at {best_at}; \
             {strict_wins} seeds with det at 100% vs bench below, first {win_at}",
            best_gap * 100.0
        ),
    );
}

#[test]
fn criterion_06_saturation_ordering() {
    const TOL: f64 = 0.01;
    let mut ok = true;
    let mut notes = Vec::new();
    for &n in &GRID_TASKS {
        for &s in &GRID_SINRS {
            let det = cell(n, s, Scheme::Deterministic);
            let bench = cell(n, s, Scheme::Benchmark);
            let pair_ok = mean(&det.comm_sat) <= mean(&bench.comm_sat) + TOL
                && mean(&det.compute_sat) <= mean(&bench.compute_sat) + TOL;
            if !pair_ok {
                notes.push(format!(
                    "det above bench at ({n}, {s} dB): comm {:.3} vs {:.3}, compute {:.3} vs {:.3}",
                    mean(&det.comm_sat),
                    mean(&bench.comm_sat),
                    mean(&det.compute_sat),
                    mean(&bench.compute_sat)
                ));
            }
            ok &= pair_ok;
        }
    }
    for &scheme in &[Scheme::Deterministic, Scheme::Benchmark] {
        for &n in &GRID_TASKS {
            let low = cell(n, GRID_SINRS[0], scheme);
            let high = cell(n, GRID_SINRS[1], scheme);
            let falls = mean(&high.comm_sat) <= mean(&low.comm_sat) + TOL
                && mean(&high.compute_sat) <= mean(&low.compute_sat) + TOL;
            if !falls {
                notes.push(format!(
                    "{scheme} saturation rose with SINR at {n} tasks: comm {:.3} -> {:.3}",
                    mean(&low.comm_sat),
                    mean(&high.comm_sat)
                ));
            }
            ok &= falls;
        }
    }
    let det_3 = mean(&cell(30, 3, Scheme::Deterministic).comm_sat);
    let det_27 = mean(&cell(30, 27, Scheme::Deterministic).comm_sat);
    verdict(
        6,
        "saturation ordering",
        ok,
        &if notes.is_empty() {
            format!("det comm saturation at 30 tasks falls {det_3:.3} -> {det_27:.3} with SINR")
        } else {
            notes.join("; ")
        },
    );
}

#[test]
fn criterion_07_adaptive_offloading() {
    let pool = |s: i32, scheme: Scheme, f: fn(&Cell) -> &[f64]| -> Vec<f64> {
        GRID_TASKS
            .iter()
            .flat_map(|&n| f(cell(n, s, scheme)).to_vec())
            .collect()
    };

    let share_3 = mean(&pool(3, Scheme::Deterministic, |c| &c.offload_share));
    let share_27 = mean(&pool(27, Scheme::Deterministic, |c| &c.offload_share));
    let share_ok = share_3 < share_27;

    let det_sizes = pool(3, Scheme::Deterministic, |c| &c.offload_sizes);
    let bench_sizes = pool(3, Scheme::Benchmark, |c| &c.offload_sizes);
    let det_median = percentile(&det_sizes, 50.0);
    let bench_median = percentile(&bench_sizes, 50.0);
    let size_ok = det_median <= bench_median;

    verdict(
        7,
        "adaptive offloading",
        share_ok && size_ok,
        &format!(
            "det edge+cloud share {share_3:.3} @ 3 dB vs {share_27:.3} @ 27 dB; \
             median offloaded size @ 3 dB: det {:.0} vs bench {:.0} bits \
             ({} / {} samples)",
            det_median,
            bench_median,
            det_sizes.len(),
            bench_sizes.len()
        ),
    );
}

#[test]
fn criterion_08_conservation_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut total_slots = 0u64;
    let mut violations = 0u64;
    let mut scenarios = 0u32;
    while total_slots < 1_000_000 && scenarios < 5_000 {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.sne_count = rng.gen_range(3..=12);
        cfg.topology.lc_count = rng.gen_range(1..=3);
        cfg.topology.intra_sinr_db = rng.gen_range(0.0..30.0);
        cfg.topology.parent_sinr_db = rng.gen_range(0.0..30.0);
        if rng.gen_bool(0.25) {
            // Occasionally shrink the pools to a handful of resources so
            // grant contention is actually exercised.
            cfg.topology.intra_pool_bandwidth_hz = 1.44e6;
            cfg.topology.parent_pool_bandwidth_hz = 1.8e6;
        }
        cfg.engine.max_resources_per_task = rng.gen_range(2..=16);
        cfg.tasks.count = rng.gen_range(5..=20);
        cfg.tasks.size_bits = (50.0e3, rng.gen_range(0.5e6..2.5e6));
        cfg.tasks.deadline_s = (0.02, rng.gen_range(0.05..0.30));
        cfg.tasks.horizon_s = rng.gen_range(0.05..0.50);
        cfg.validate().expect("randomized scenario stays valid");

        let topo = Topology::build(&cfg).expect("topology");
        let tasks = generate_tasks(&cfg.tasks, &topo, &mut rng).expect("tasks");
        let mut params =
            SimParams::from_config(&cfg, detoff::channel::Fading::seeded(rng.gen()))
                .expect("params");
        params.check_invariants = true;
        let ctx = SolveContext::new(
            &topo,
            &tasks,
            ObjectiveKind::DeadlineMiss,
            &params,
            cfg.penalty.miss_penalty,
        )
        .expect("context");
        let assignment = random_allocate(&ctx, &mut rng);
        let outcome = simulate(&topo, &tasks, &assignment, &params).expect("simulate");

        total_slots += outcome.invariants.slots;
        violations += outcome.invariants.resource_double_bookings
            + outcome.invariants.link_rate_overruns
            + outcome.invariants.payload_mismatches;
        scenarios += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        8,
        "conservation suite",
        total_slots >= 1_000_000 && violations == 0,
        &format!(
            "{total_slots} slots over {scenarios} randomized scenarios, \
             {violations} violations; {elapsed:.0} s"
        ),
    );
}

#[test]
fn criterion_09_determinism() {
    let mut base = ScenarioConfig::default();
    base.seeds = vec![1, 2];
    base.topology.sne_count = 5;
    base.topology.lc_count = 2;
    base.tasks.count = 6;
    base.tasks.size_bits = (100.0e3, 600.0e3);
    base.ga.population = 16;
    base.ga.generations = 2;
    let axes = SweepAxes {
        task_counts: vec![4, 8],
        sinrs_db: vec![3.0, 27.0],
        schemes: Scheme::ALL.to_vec(),
    };

    let dirs: Vec<tempfile::TempDir> =
        (0..4).map(|_| tempfile::tempdir().expect("tempdir")).collect();
    sweep(&base, &axes, dirs[0].path()).expect("first sweep");
    sweep(&base, &axes, dirs[1].path()).expect("repeat sweep");
    for (dir, threads) in [(&dirs[2], 1usize), (&dirs[3], 4)] {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool")
            .install(|| sweep(&base, &axes, dir.path()))
            .expect("pooled sweep");
    }

    let read = |i: usize, file: &str| std::fs::read(dirs[i].path().join(file)).expect("output");
    let mut identical = true;
    for file in ["metrics.csv", "aggregate.csv", "budget_samples.csv", "ga_trace.csv"] {
        let first = read(0, file);
        identical &= (1..4).all(|i| read(i, file) == first);
    }

    let rerun_equal = run(&base).expect("run a") == run(&base).expect("run b");

    verdict(
        9,
        "determinism",
        identical && rerun_equal,
        "4 sweeps (repeat, 1-thread, 4-thread) byte-identical across all tables; \
         repeated runs equal",
    );
}

#[test]
fn criterion_10_scale_smoke() {
    let cfg = ScenarioConfig::default();
    let start = Instant::now();
    let result = run(&cfg).expect("default scenario");
    let elapsed = start.elapsed().as_secs_f64();
    let report = &result.per_seed[0].report;
    verdict(
        10,
        "scale smoke",
        elapsed < 60.0 && report.task_count == 45,
        &format!(
            "45 tasks, population 1000 x 10 generations in {elapsed:.1} s; \
             satisfied {}/{}",
            report.satisfied_count, report.task_count
        ),
    );
}
