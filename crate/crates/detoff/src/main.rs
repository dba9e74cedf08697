//! Command-line front end: single runs, parameter sweeps, oracle
//! comparisons, and constraint audits, all emitting plot-ready CSV tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use detoff::config::{ScenarioConfig, Scheme};
use detoff::runner::{
    constraint_check, oracle_check, run, sweep, write_outputs, write_trace_files, CellView,
    SweepAxes,
};
use detoff::Result;

#[derive(Parser)]
#[command(
    name = "detoff",
    version,
    about = "Slot-accurate simulator and optimizer for deadline-bound task \
             offloading across a subnetwork-edge-cloud continuum"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML); built-in defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Directory for the result tables.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Explicit master seeds, comma separated; overrides the scenario file.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    seed: Vec<u64>,

    /// Shorthand for master seeds 1..=N; --seed wins if both are given.
    #[arg(long, value_name = "N")]
    seeds: Option<u64>,

    /// Allocation scheme override: deterministic, benchmark, or random.
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,

    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
}

impl Common {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        if let Some(scheme) = self.scheme {
            cfg.scheme = scheme;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        } else if let Some(n) = self.seeds {
            cfg.seeds = (1..=n).collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    s.parse().map_err(|e: detoff::Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario over its seeds and write the result tables.
    Run {
        #[command(flatten)]
        common: Common,

        /// Also write each seed's task table and lifecycle event log.
        #[arg(long)]
        trace: bool,
    },
    /// Run a task-count x SINR x scheme grid, resuming finished cells.
    Sweep {
        #[command(flatten)]
        common: Common,

        /// Task-count axis, comma separated.
        #[arg(long = "tasks", value_name = "LIST", value_delimiter = ',',
              default_value = "15,25,35,45,55,65,75")]
        task_counts: Vec<usize>,

        /// SINR axis in dB (sets both wireless pools), comma separated.
        #[arg(long = "sinr", value_name = "LIST", value_delimiter = ',',
              default_value = "3,9,15,21,27")]
        sinrs_db: Vec<f64>,

        /// Scheme axis, comma separated; all three when omitted.
        #[arg(long = "schemes", value_name = "LIST", value_delimiter = ',',
              value_parser = parse_scheme)]
        schemes: Vec<Scheme>,
    },
    /// Compare the genetic solver against exhaustive search per seed.
    OracleCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Audit the modeled constraints on each seed's evaluation run.
    CheckConstraints {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { common, trace } => cmd_run(&common, trace),
        Command::Sweep { common, task_counts, sinrs_db, schemes } => {
            let schemes =
                if schemes.is_empty() { Scheme::ALL.to_vec() } else { schemes };
            cmd_sweep(&common, SweepAxes { task_counts, sinrs_db, schemes })
        }
        Command::OracleCheck { common } => cmd_oracle_check(&common),
        Command::CheckConstraints { common } => cmd_check_constraints(&common),
    }
}

fn cmd_run(common: &Common, trace: bool) -> Result<ExitCode> {
    let cfg = common.resolve()?;
    let result = run(&cfg)?;
    if !common.quiet {
        for sr in &result.per_seed {
            println!(
                "seed {}: {}/{} satisfied ({:.3}), fitness {}, makespan {:.4} s",
                sr.seed,
                sr.report.satisfied_count,
                sr.report.task_count,
                sr.report.satisfied_ratio,
                sr.solve.fitness,
                sr.report.makespan_s,
            );
        }
        let agg = &result.aggregate;
        println!(
            "aggregate over {} seed(s): satisfied {:.3} ± {:.3}, comm saturation {:.3}, \
             compute saturation {:.3}",
            agg.runs,
            agg.satisfied_ratio.mean,
            agg.satisfied_ratio.std,
            agg.comm_saturation.mean,
            agg.compute_saturation.mean,
        );
    }
    let cell = CellView {
        config: &cfg,
        fingerprint: &result.fingerprint,
        seeds: &result.per_seed,
    };
    write_outputs(&common.out, &cfg, &[cell])?;
    if trace {
        let topo = detoff::Topology::build(&cfg)?;
        let single = result.per_seed.len() == 1;
        for sr in &result.per_seed {
            let suffix = if single { String::new() } else { format!("_{}", sr.seed) };
            let traced = detoff::runner::run_seed(&topo, &cfg, sr.seed, true)?;
            write_trace_files(&common.out, &traced, &suffix)?;
        }
    }
    if !common.quiet {
        println!("tables written under {}", common.out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(common: &Common, axes: SweepAxes) -> Result<ExitCode> {
    let cfg = common.resolve()?;
    let outcome = sweep(&cfg, &axes, &common.out)?;
    if !common.quiet {
        let fresh: usize = outcome.cells.iter().map(|c| c.new_seeds.len()).sum();
        let skipped: usize = outcome.cells.iter().map(|c| c.skipped_seeds.len()).sum();
        println!(
            "{} cell(s): {} seed run(s) computed, {} resumed from {}",
            outcome.cells.len(),
            fresh,
            skipped,
            common.out.display(),
        );
    }
    if outcome.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &outcome.failures {
            eprintln!(
                "cell failed (scheme {}, {} tasks, {} dB): {}",
                f.scheme, f.task_count, f.sinr_db, f.error
            );
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_oracle_check(common: &Common) -> Result<ExitCode> {
    let cfg = common.resolve()?;
    let rows = oracle_check(&cfg)?;
    let matched = rows.iter().filter(|r| r.matched).count();
    if !common.quiet {
        for r in &rows {
            println!(
                "seed {}: oracle {}, ga {}, {}",
                r.seed,
                r.oracle_fitness,
                r.ga_fitness,
                if r.matched { "match" } else { "MISS" }
            );
        }
        println!("{matched}/{} matched", rows.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check_constraints(common: &Common) -> Result<ExitCode> {
    let cfg = common.resolve()?;
    let reports = constraint_check(&cfg)?;
    let mut all_ok = true;
    for (seed, report) in &reports {
        if !report.all_ok() {
            all_ok = false;
        }
        if !common.quiet || !report.all_ok() {
            println!("seed {seed}:");
            print!("{report}");
        }
    }
    if all_ok {
        if !common.quiet {
            println!("all constraints hold over {} seed(s)", reports.len());
        }
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}
