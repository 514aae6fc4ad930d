//! Config-driven experiments that write CSV artifacts, plus the check suite.
//!
//! Every run writes `run.csv` (a per-step or per-sweep-point table),
//! `summary.csv` (`metric,value,tolerance,flag`) and `config.txt` (the fully
//! expanded config) into its output directory.

pub mod checks;
pub mod config;
pub mod csvout;
pub mod mode_weight;
pub mod studies;
pub mod train;

use std::path::{Path, PathBuf};

pub use checks::{run_check_suite, run_group, CheckOptions, CheckReport, GroupResult, PROPERTIES};
pub use config::{parse_config, EstimatorKind, Experiment, ExperimentConfig};
pub use csvout::{Flag, MetricRow};

use crate::error::Result;

/// Environment variable that overrides the default output root.
pub const OUT_ENV: &str = "EBM_OUT";

/// Table and summary produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub summary: Vec<MetricRow>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.summary.iter().all(MetricRow::passed)
    }

    pub fn metric(&self, name: &str) -> Option<&MetricRow> {
        self.summary.iter().find(|r| r.name == name)
    }
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub run_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub output: ExperimentOutput,
}

/// `$EBM_OUT` if set, else `runs`.
pub fn default_output_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// `cfg.out` if set, else `<root>/<experiment>[-<estimator>]-seed<seed>`.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &cfg.out {
        return PathBuf::from(out);
    }
    let name = match cfg.experiment {
        Experiment::GaussianRecovery => format!("{}-{}-seed{}", cfg.experiment, cfg.estimator.kind, cfg.seed),
        e => format!("{e}-seed{}", cfg.seed),
    };
    default_output_root().join(name)
}

/// Computes an experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::GaussianRecovery => {
            let out = train::train(cfg)?;
            Ok(ExperimentOutput { header: out.trace.header, rows: out.trace.rows, summary: out.summary })
        }
        Experiment::NcePartition => studies::nce_partition(cfg),
        Experiment::ControlVariate => studies::control_variate(cfg),
        Experiment::ModeWeight => mode_weight::mode_weight(cfg),
        Experiment::CdSmConnection => studies::cd_sm_connection(cfg),
        Experiment::DeBruijn => studies::de_bruijn(cfg),
        Experiment::SsmNceEquiv => studies::ssm_nce_equiv(cfg),
    }
}

/// Runs `cfg` and writes its artifacts under [`output_dir`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    run_experiment_in(cfg, &output_dir(cfg))
}

/// Runs `cfg` and writes its artifacts into `dir`.
pub fn run_experiment_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunArtifacts> {
    let output = execute(cfg)?;
    std::fs::create_dir_all(dir)?;
    let run_csv = dir.join("run.csv");
    let summary_csv = dir.join("summary.csv");
    csvout::write_table(&run_csv, &output.header, &output.rows)?;
    csvout::write_metrics(&summary_csv, "metric", &output.summary)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(RunArtifacts { dir: dir.to_path_buf(), run_csv, summary_csv, output })
}
