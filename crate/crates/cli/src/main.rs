use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ebm_core::experiments::checks::{groups, DEFAULT_SEED};
use ebm_core::experiments::config::EstimatorKind;
use ebm_core::experiments::{
    parse_config, run_check_suite, run_experiment, CheckOptions, Experiment, ExperimentConfig, MetricRow,
};
use ebm_core::EbmError;

/// Energy-based model training experiments and oracle checks.
#[derive(Debug, Parser)]
#[command(name = "ebm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment from a `key = value` config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to `$EBM_OUT` (or `runs`) plus a run name.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant and oracle suite and write report.csv.
    Check {
        /// Only groups whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Debug: flip the Hessian sign in the Fisher-oracle test (expected to fail).
        #[arg(long)]
        flip_sm_sign: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Directory for report.csv; defaults to `$EBM_OUT/check` (or `runs/check`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiments, estimators and check groups.
    List,
    /// Print the full default config for an experiment.
    Defaults { experiment: String },
}

/// Failures that map to exit code 2.
fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        matches!(e.downcast_ref::<EbmError>(), Some(EbmError::Config { .. } | EbmError::InvalidArgument(_)))
            || e.downcast_ref::<std::io::Error>().is_some()
    })
}

fn print_rows(rows: &[MetricRow]) {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
    for r in rows {
        println!("  {:<width$}  {:>14.6e}  {:<16} {}", r.name, r.value, r.tolerance, r.flag.as_str());
    }
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<bool> {
    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out = Some(out.to_string_lossy().into_owned());
    }
    let art = run_experiment(&cfg)?;
    println!("{} seed {} -> {}", cfg.experiment, cfg.seed, art.dir.display());
    print_rows(&art.output.summary);
    Ok(art.output.passed())
}

fn check(filter: Option<String>, flip_sm_sign: bool, seed: u64, out: Option<PathBuf>) -> Result<bool> {
    let report = run_check_suite(&CheckOptions { filter, flip_sm_sign, out_dir: out, seed })?;
    for g in &report.groups {
        println!("{} ({:.1} s) {}", g.group, g.seconds, if g.passed() { "PASS" } else { "FAIL" });
        print_rows(&g.rows);
    }
    println!("{} properties -> {}", report.row_count(), report.path.display());
    Ok(report.passed())
}

fn list() {
    println!("experiments:");
    for e in Experiment::ALL {
        println!("  {:<18} {}", e.name(), e.description());
    }
    println!("estimators:");
    for k in EstimatorKind::ALL {
        println!("  {:<18} {}", k.name(), k.description());
    }
    println!("check groups:");
    for g in groups() {
        println!("  {g}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, seed, out } => run(config, seed, out),
        Command::Check { filter, flip_sm_sign, seed, out } => check(filter, flip_sm_sign, seed, out),
        Command::List => {
            list();
            Ok(true)
        }
        Command::Defaults { experiment } => experiment
            .parse::<Experiment>()
            .map(|e| {
                print!("{}", ExperimentConfig::defaults(e).to_text());
                true
            })
            .map_err(|msg| EbmError::Config { line: None, message: msg }.into()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more assertions failed");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_usage_error(&err) { 2 } else { 1 })
        }
    }
}
