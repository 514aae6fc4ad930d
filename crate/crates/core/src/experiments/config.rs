//! Flat `key = value` experiment configs.
//!
//! One assignment per line, `#` starts a comment, dotted keys select a
//! section (`estimator.sigma = 0.5`). Values are bare: numbers, `true` /
//! `false`, names, or comma-separated lists. Every key has an
//! experiment-specific default, so a config only needs `experiment = …`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::energy::EnergyFamily;
use crate::error::{EbmError, Result};
use crate::estimators::Projection;

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "unknown value `{s}` (expected one of: {})",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(
    /// Available experiments.
    Experiment {
        GaussianRecovery => "gaussian_recovery",
        NcePartition => "nce_partition",
        ControlVariate => "control_variate",
        ModeWeight => "mode_weight",
        CdSmConnection => "cd_sm_connection",
        DeBruijn => "de_bruijn",
        SsmNceEquiv => "ssm_nce_equiv",
    }
);

impl Experiment {
    pub fn description(self) -> &'static str {
        match self {
            Experiment::GaussianRecovery => "train an energy family on sampled data with any estimator",
            Experiment::NcePartition => "NCE log-partition recovery and self-normalization",
            Experiment::ControlVariate => "per-sample DSM variance with and without the control variate",
            Experiment::ModeWeight => "mixture weight recovery: plain SM vs multi-scale DSM with annealed Langevin",
            Experiment::CdSmConnection => "one-step Langevin CD gradient vs the Fisher-divergence gradient",
            Experiment::DeBruijn => "d/dt KL of Gaussian-smoothed pairs vs the Fisher divergence",
            Experiment::SsmNceEquiv => "Taylor gap between shifted NCE and the sliced SM objective",
        }
    }
}

named_enum!(
    /// Training estimators selectable by `estimator = …`.
    EstimatorKind {
        Sm => "sm",
        Ssm => "ssm",
        Dsm => "dsm",
        DsmCv => "dsm_cv",
        Nce => "nce",
        Cd => "cd",
        Pcd => "pcd",
    }
);

impl EstimatorKind {
    pub fn description(self) -> &'static str {
        match self {
            EstimatorKind::Sm => "implicit score matching (exact Laplacian)",
            EstimatorKind::Ssm => "sliced score matching (one HVP per slice)",
            EstimatorKind::Dsm => "denoising score matching",
            EstimatorKind::DsmCv => "denoising score matching with the zero-mean control variate",
            EstimatorKind::Nce => "noise-contrastive estimation with Gaussian noise",
            EstimatorKind::Cd => "contrastive divergence, chains started at the data",
            EstimatorKind::Pcd => "persistent contrastive divergence with a replay buffer",
        }
    }

    /// True when the θ-gradient may need the finite-difference path.
    pub fn uses_input_derivatives(self) -> bool {
        matches!(self, EstimatorKind::Sm | EstimatorKind::Ssm | EstimatorKind::Dsm | EstimatorKind::DsmCv)
    }
}

named_enum!(
    FamilyName {
        Gaussian => "gaussian",
        Mixture => "mixture",
        Poly => "poly",
        Mlp => "mlp",
    }
);

named_enum!(
    DataDist {
        Normal => "normal",
        Mixture => "mixture",
    }
);

named_enum!(
    Schedule {
        Constant => "constant",
        Cosine => "cosine",
    }
);

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub name: FamilyName,
    pub dim: usize,
    pub components: usize,
    pub degree: usize,
    pub hidden: Vec<usize>,
}

impl FamilySpec {
    pub fn build(&self) -> Result<EnergyFamily> {
        match self.name {
            FamilyName::Gaussian => EnergyFamily::gaussian(self.dim),
            FamilyName::Mixture => EnergyFamily::mixture_rbf(self.components, self.dim),
            FamilyName::Poly => EnergyFamily::poly1d(self.degree),
            FamilyName::Mlp => EnergyFamily::mlp(self.dim, &self.hidden),
        }
    }

    /// Input dimension of the built family.
    pub fn input_dim(&self) -> usize {
        match self.name {
            FamilyName::Poly => 1,
            _ => self.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub sigma: f64,
    pub slices: usize,
    pub projection: Projection,
    pub variance_reduced: bool,
    pub step_size: f64,
    pub langevin_steps: usize,
    pub mala: bool,
    pub buffer_capacity: usize,
    pub reinit_prob: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub noise_samples: usize,
    pub nu: Option<f64>,
    pub learn_log_z: bool,
    /// Minibatch size; 0 means the full dataset every step.
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSpec {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSpec {
    pub dist: DataDist,
    pub dim: usize,
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
    /// Weight of the positive mode of the two-mode mixture.
    pub weight: f64,
    /// Modes sit at ±`mode_mean`.
    pub mode_mean: f64,
    pub mode_std: f64,
}

/// Closed-form Gaussian model used by the analytic studies.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub mean: f64,
    pub std: f64,
}

/// Sweep grid and sample counts for the non-training studies.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// ε for cd_sm_connection, t for de_bruijn, ‖v‖ for ssm_nce_equiv, σ for
    /// control_variate.
    pub values: Vec<f64>,
    pub samples: usize,
    pub fd_step: f64,
    pub resamples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealSpec {
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub levels: usize,
    pub steps_per_level: usize,
    pub base_step: f64,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub steps: usize,
    pub out: Option<String>,
    pub record_wall_time: bool,
    pub family: FamilySpec,
    pub estimator: EstimatorSpec,
    pub optimizer: OptimizerSpec,
    pub data: DataSpec,
    pub model: ModelSpec,
    pub sweep: SweepSpec,
    pub anneal: AnnealSpec,
}

impl ExperimentConfig {
    /// Defaults for `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = ExperimentConfig {
            experiment,
            seed: 7,
            steps: 2000,
            out: None,
            record_wall_time: false,
            family: FamilySpec { name: FamilyName::Gaussian, dim: 1, components: 2, degree: 4, hidden: vec![32, 32] },
            estimator: EstimatorSpec {
                kind: EstimatorKind::Sm,
                sigma: 0.5,
                slices: 64,
                projection: Projection::Gaussian,
                variance_reduced: false,
                step_size: 0.1,
                langevin_steps: 50,
                mala: false,
                buffer_capacity: 10_000,
                reinit_prob: 0.05,
                noise_mean: 1.0,
                noise_std: 3.0,
                noise_samples: 10_000,
                nu: None,
                learn_log_z: true,
                batch_size: 0,
            },
            optimizer: OptimizerSpec { lr: 0.05, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, schedule: Schedule::Cosine },
            data: DataSpec {
                dist: DataDist::Normal,
                dim: 1,
                mean: 1.0,
                std: 2.0,
                samples: 10_000,
                weight: 0.7,
                mode_mean: 4.0,
                mode_std: 0.1,
            },
            model: ModelSpec { mean: 0.0, std: 1.0 },
            sweep: SweepSpec { values: vec![], samples: 100_000, fd_step: 1e-4, resamples: 100 },
            anneal: AnnealSpec {
                sigma_max: 2.0,
                sigma_min: 0.1,
                levels: 5,
                steps_per_level: 300,
                base_step: 0.05,
                draws: 10_000,
            },
        };
        match experiment {
            Experiment::GaussianRecovery => {}
            Experiment::NcePartition => {
                cfg.estimator.kind = EstimatorKind::Nce;
                cfg.estimator.noise_mean = 0.0;
                cfg.estimator.noise_std = std::f64::consts::SQRT_2;
                cfg.estimator.noise_samples = 100_000;
                cfg.data.mean = 0.0;
                cfg.data.std = 1.0;
                cfg.data.samples = 100_000;
                cfg.steps = 400;
            }
            Experiment::ControlVariate => {
                cfg.estimator.kind = EstimatorKind::DsmCv;
                cfg.data.mean = 0.0;
                cfg.data.std = 1.0;
                cfg.data.samples = 1000;
                cfg.sweep.values = vec![0.01, 10.0];
            }
            Experiment::ModeWeight => {
                cfg.family.name = FamilyName::Mixture;
                cfg.estimator.kind = EstimatorKind::Dsm;
                cfg.data.dist = DataDist::Mixture;
                cfg.steps = 800;
                cfg.estimator.batch_size = 500;
            }
            Experiment::CdSmConnection => {
                cfg.data.mean = 0.5;
                cfg.data.std = 1.0;
                cfg.estimator.kind = EstimatorKind::Cd;
                cfg.sweep.values = vec![0.3, 0.1, 0.03, 0.01];
            }
            Experiment::DeBruijn => {
                cfg.data.mean = 0.0;
                cfg.data.std = 1.0;
                cfg.model = ModelSpec { mean: 0.8, std: 1.5 };
                cfg.sweep.values = vec![0.1, 0.5, 1.0];
            }
            Experiment::SsmNceEquiv => {
                cfg.data.mean = 0.0;
                cfg.data.std = 1.0;
                cfg.model = ModelSpec { mean: 0.5, std: 0.8 };
                cfg.sweep.values = vec![0.1, 0.05, 0.025, 0.0125];
            }
        }
        cfg
    }

    /// Cross-key checks that need the whole config.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(EbmError::config(None, m));
        let family = self.family.build().map_err(|e| EbmError::config(None, format!("family: {e}")))?;
        if self.data.dim != self.family.input_dim() {
            return err(format!(
                "family `{}` works on {}-dimensional inputs but data.dim = {}",
                self.family.name,
                self.family.input_dim(),
                self.data.dim
            ));
        }
        if self.data.dist == DataDist::Mixture && self.data.dim != 1 {
            return err("mixture data is one-dimensional; set data.dim = 1".into());
        }
        let need_values = |what: &str| {
            if self.sweep.values.is_empty() {
                err(format!("sweep.values must list at least one {what}"))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            Experiment::GaussianRecovery => {
                let p = family.param_count();
                if self.estimator.kind.uses_input_derivatives()
                    && !family.has_mixed_derivatives()
                    && p > crate::estimators::FD_PARAM_LIMIT
                {
                    return err(format!(
                        "estimator `{}` on family {family} needs finite-difference θ-gradients, which are \
                         limited to {} parameters (this family has {p}); use cd, pcd or nce",
                        self.estimator.kind,
                        crate::estimators::FD_PARAM_LIMIT
                    ));
                }
                if self.estimator.batch_size > self.data.samples {
                    return err("estimator.batch_size exceeds data.samples".into());
                }
            }
            Experiment::NcePartition => {
                if self.data.dim != 1 || self.data.dist != DataDist::Normal {
                    return err("nce_partition needs one-dimensional normal data".into());
                }
            }
            Experiment::ControlVariate => need_values("noise scale")?,
            Experiment::ModeWeight => {
                if self.family.name != FamilyName::Mixture || self.data.dist != DataDist::Mixture {
                    return err("mode_weight needs family = mixture and data = mixture".into());
                }
                if self.anneal.sigma_min >= self.anneal.sigma_max {
                    return err("anneal.sigma_min must be below anneal.sigma_max".into());
                }
            }
            Experiment::CdSmConnection | Experiment::DeBruijn | Experiment::SsmNceEquiv => {
                if self.family.name != FamilyName::Gaussian || self.family.dim != 1 {
                    return err(format!("{} uses the one-dimensional Gaussian family", self.experiment));
                }
                if self.data.dist != DataDist::Normal {
                    return err(format!("{} needs normal data", self.experiment));
                }
                need_values(match self.experiment {
                    Experiment::CdSmConnection => "step size",
                    Experiment::DeBruijn => "smoothing time",
                    _ => "shift norm",
                })?;
            }
        }
        Ok(())
    }

    /// Serializes every key, so the result parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = (key.show)(self) {
                let _ = writeln!(out, "{} = {}", key.name, v);
            }
        }
        out
    }
}

type Apply = fn(&mut ExperimentConfig, &str) -> std::result::Result<(), String>;
type Show = fn(&ExperimentConfig) -> Option<String>;

struct Key {
    name: &'static str,
    apply: Apply,
    show: Show,
}

fn num(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("expected a finite number, got `{s}`"));
    }
    Ok(v)
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = num(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn unit_open(s: &str) -> std::result::Result<f64, String> {
    let v = num(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {v}"))
    }
}

fn unit_closed(s: &str) -> std::result::Result<f64, String> {
    let v = num(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

fn count(s: &str) -> std::result::Result<usize, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn count_pos(s: &str) -> std::result::Result<usize, String> {
    match count(s)? {
        0 => Err("must be >= 1, got 0".into()),
        n => Ok(n),
    }
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn list<T>(s: &str, item: fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(vec![]);
    }
    s.split(',').map(|p| item(p.trim())).collect()
}

fn show_list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// Shortest text that parses back to exactly `v`.
fn show_f(v: f64) -> String {
    format!("{v:?}")
}

macro_rules! key {
    ($name:literal, |$c:ident, $s:ident| $apply:expr, |$d:ident| $show:expr) => {
        Key {
            name: $name,
            apply: |$c: &mut ExperimentConfig, $s: &str| {
                $apply;
                Ok(())
            },
            show: |$d: &ExperimentConfig| $show,
        }
    };
}

const KEYS: &[Key] = &[
    key!("experiment", |c, s| c.experiment = s.parse()?, |c| Some(c.experiment.to_string())),
    key!("seed", |c, s| c.seed = s.parse().map_err(|_| format!("expected an unsigned integer, got `{s}`"))?, |c| Some(
        c.seed.to_string()
    )),
    key!("steps", |c, s| c.steps = count_pos(s)?, |c| Some(c.steps.to_string())),
    key!("out", |c, s| c.out = Some(s.to_string()), |c| c.out.clone()),
    key!("record_wall_time", |c, s| c.record_wall_time = boolean(s)?, |c| Some(c.record_wall_time.to_string())),
    key!("family", |c, s| c.family.name = s.parse()?, |c| Some(c.family.name.to_string())),
    key!("family.dim", |c, s| c.family.dim = count_pos(s)?, |c| Some(c.family.dim.to_string())),
    key!("family.components", |c, s| c.family.components = count_pos(s)?, |c| Some(c.family.components.to_string())),
    key!("family.degree", |c, s| c.family.degree = count_pos(s)?, |c| Some(c.family.degree.to_string())),
    key!("family.hidden", |c, s| c.family.hidden = list(s, count_pos)?, |c| Some(show_list(&c.family.hidden))),
    key!("estimator", |c, s| c.estimator.kind = s.parse()?, |c| Some(c.estimator.kind.to_string())),
    key!("estimator.sigma", |c, s| c.estimator.sigma = positive(s)?, |c| Some(show_f(c.estimator.sigma))),
    key!("estimator.slices", |c, s| c.estimator.slices = count_pos(s)?, |c| Some(c.estimator.slices.to_string())),
    key!(
        "estimator.projection",
        |c, s| c.estimator.projection = s.parse().map_err(|e: EbmError| e.to_string())?,
        |c| Some(c.estimator.projection.to_string())
    ),
    key!("estimator.variance_reduced", |c, s| c.estimator.variance_reduced = boolean(s)?, |c| Some(
        c.estimator.variance_reduced.to_string()
    )),
    key!("estimator.step_size", |c, s| c.estimator.step_size = positive(s)?, |c| Some(show_f(c.estimator.step_size))),
    key!("estimator.langevin_steps", |c, s| c.estimator.langevin_steps = count_pos(s)?, |c| Some(
        c.estimator.langevin_steps.to_string()
    )),
    key!("estimator.mala", |c, s| c.estimator.mala = boolean(s)?, |c| Some(c.estimator.mala.to_string())),
    key!("estimator.buffer_capacity", |c, s| c.estimator.buffer_capacity = count_pos(s)?, |c| Some(
        c.estimator.buffer_capacity.to_string()
    )),
    key!("estimator.reinit_prob", |c, s| c.estimator.reinit_prob = unit_closed(s)?, |c| Some(show_f(
        c.estimator.reinit_prob
    ))),
    key!("estimator.noise_mean", |c, s| c.estimator.noise_mean = num(s)?, |c| Some(show_f(c.estimator.noise_mean))),
    key!("estimator.noise_std", |c, s| c.estimator.noise_std = positive(s)?, |c| Some(show_f(c.estimator.noise_std))),
    key!("estimator.noise_samples", |c, s| c.estimator.noise_samples = count_pos(s)?, |c| Some(
        c.estimator.noise_samples.to_string()
    )),
    key!("estimator.nu", |c, s| c.estimator.nu = Some(positive(s)?), |c| c.estimator.nu.map(show_f)),
    key!("estimator.learn_log_z", |c, s| c.estimator.learn_log_z = boolean(s)?, |c| Some(
        c.estimator.learn_log_z.to_string()
    )),
    key!("estimator.batch_size", |c, s| c.estimator.batch_size = count(s)?, |c| Some(
        c.estimator.batch_size.to_string()
    )),
    key!("optimizer.lr", |c, s| c.optimizer.lr = positive(s)?, |c| Some(show_f(c.optimizer.lr))),
    key!("optimizer.beta1", |c, s| c.optimizer.beta1 = unit_open(s)?, |c| Some(show_f(c.optimizer.beta1))),
    key!("optimizer.beta2", |c, s| c.optimizer.beta2 = unit_open(s)?, |c| Some(show_f(c.optimizer.beta2))),
    key!("optimizer.epsilon", |c, s| c.optimizer.epsilon = positive(s)?, |c| Some(show_f(c.optimizer.epsilon))),
    key!("optimizer.schedule", |c, s| c.optimizer.schedule = s.parse()?, |c| Some(c.optimizer.schedule.to_string())),
    key!("data", |c, s| c.data.dist = s.parse()?, |c| Some(c.data.dist.to_string())),
    key!("data.dim", |c, s| c.data.dim = count_pos(s)?, |c| Some(c.data.dim.to_string())),
    key!("data.mean", |c, s| c.data.mean = num(s)?, |c| Some(show_f(c.data.mean))),
    key!("data.std", |c, s| c.data.std = positive(s)?, |c| Some(show_f(c.data.std))),
    key!("data.samples", |c, s| c.data.samples = count_pos(s)?, |c| Some(c.data.samples.to_string())),
    key!("data.weight", |c, s| c.data.weight = unit_open(s)?, |c| Some(show_f(c.data.weight))),
    key!("data.mode_mean", |c, s| c.data.mode_mean = positive(s)?, |c| Some(show_f(c.data.mode_mean))),
    key!("data.mode_std", |c, s| c.data.mode_std = positive(s)?, |c| Some(show_f(c.data.mode_std))),
    key!("model.mean", |c, s| c.model.mean = num(s)?, |c| Some(show_f(c.model.mean))),
    key!("model.std", |c, s| c.model.std = positive(s)?, |c| Some(show_f(c.model.std))),
    key!("sweep.values", |c, s| c.sweep.values = list(s, positive)?, |c| Some(show_list(
        &c.sweep.values.iter().map(|v| show_f(*v)).collect::<Vec<_>>()
    ))),
    key!("sweep.samples", |c, s| c.sweep.samples = count_pos(s)?, |c| Some(c.sweep.samples.to_string())),
    key!("sweep.fd_step", |c, s| c.sweep.fd_step = positive(s)?, |c| Some(show_f(c.sweep.fd_step))),
    key!("sweep.resamples", |c, s| c.sweep.resamples = count_pos(s)?, |c| Some(c.sweep.resamples.to_string())),
    key!("anneal.sigma_max", |c, s| c.anneal.sigma_max = positive(s)?, |c| Some(show_f(c.anneal.sigma_max))),
    key!("anneal.sigma_min", |c, s| c.anneal.sigma_min = positive(s)?, |c| Some(show_f(c.anneal.sigma_min))),
    key!("anneal.levels", |c, s| c.anneal.levels = count_pos(s)?, |c| Some(c.anneal.levels.to_string())),
    key!("anneal.steps_per_level", |c, s| c.anneal.steps_per_level = count_pos(s)?, |c| Some(
        c.anneal.steps_per_level.to_string()
    )),
    key!("anneal.base_step", |c, s| c.anneal.base_step = positive(s)?, |c| Some(show_f(c.anneal.base_step))),
    key!("anneal.draws", |c, s| c.anneal.draws = count_pos(s)?, |c| Some(c.anneal.draws.to_string())),
];

/// Names of every accepted key, in serialization order.
pub fn config_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.name)
}

/// Parses a config. Errors carry the 1-based line number where one applies.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(EbmError::config(Some(line_no), format!("expected `key = value`, got `{line}`")));
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(key) = KEYS.iter().find(|key| key.name == k) else {
            return Err(EbmError::config(Some(line_no), format!("unknown key `{k}`")));
        };
        if !seen.insert(key.name) {
            return Err(EbmError::config(Some(line_no), format!("duplicate key `{k}`")));
        }
        entries.push((line_no, key, v));
    }
    let Some(&(line_no, _, name)) = entries.iter().find(|(_, k, _)| k.name == "experiment") else {
        return Err(EbmError::config(None, "missing required key `experiment`"));
    };
    let experiment: Experiment =
        name.parse().map_err(|m| EbmError::config(Some(line_no), format!("`experiment`: {m}")))?;
    let mut cfg = ExperimentConfig::defaults(experiment);
    for (line_no, key, v) in entries {
        (key.apply)(&mut cfg, v).map_err(|m| EbmError::config(Some(line_no), format!("`{}`: {m}", key.name)))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_of(e: &EbmError) -> Option<usize> {
        match e {
            EbmError::Config { line, .. } => *line,
            _ => panic!("not a config error: {e:?}"),
        }
    }

    #[test]
    fn empty_text_is_missing_experiment() {
        let e = parse_config("").unwrap_err();
        assert!(e.to_string().contains("missing required key `experiment`"), "{e}");
    }

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config("experiment = gaussian_recovery\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(Experiment::GaussianRecovery));
        for &exp in Experiment::ALL {
            let cfg = ExperimentConfig::defaults(exp);
            let again = parse_config(&cfg.to_text()).unwrap();
            assert_eq!(again, cfg);
        }
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# header\nexperiment = gaussian_recovery # trailing\n\nestimator = dsm\nestimator.sigma = 0.25\nestimator.nu = 2\nfamily.hidden = 8, 4\nout = runs/x\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.estimator.kind, EstimatorKind::Dsm);
        assert_eq!(cfg.estimator.sigma, 0.25);
        assert_eq!(cfg.estimator.nu, Some(2.0));
        assert_eq!(cfg.family.hidden, vec![8, 4]);
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn range_error_names_the_key() {
        let e = parse_config("experiment = gaussian_recovery\nestimator.sigma = -1\n").unwrap_err();
        assert_eq!(line_of(&e), Some(2));
        assert!(e.to_string().contains("estimator.sigma"), "{e}");
    }

    #[test]
    fn type_mismatch_duplicate_and_unknown_keys() {
        let e = parse_config("experiment = de_bruijn\nsteps = many\n").unwrap_err();
        assert_eq!(line_of(&e), Some(2));
        let e = parse_config("experiment = de_bruijn\nseed = 1\nseed = 2\n").unwrap_err();
        assert_eq!(line_of(&e), Some(3));
        assert!(e.to_string().contains("duplicate"));
        let e = parse_config("experiment = de_bruijn\n\nestimator.sigmaa = 1\n").unwrap_err();
        assert_eq!(line_of(&e), Some(3));
        assert!(e.to_string().contains("unknown key"));
        let e = parse_config("experiment = de_bruijn\njust words\n").unwrap_err();
        assert_eq!(line_of(&e), Some(2));
    }

    #[test]
    fn unknown_experiment_lists_choices() {
        let e = parse_config("experiment = nope\n").unwrap_err();
        for &x in Experiment::ALL {
            assert!(e.to_string().contains(x.name()));
        }
    }

    #[test]
    fn zero_step_size_and_time_rejected() {
        assert!(parse_config("experiment = cd_sm_connection\nsweep.values = 0.1, 0\n").is_err());
        assert!(parse_config("experiment = de_bruijn\nsweep.values = -0.5\n").is_err());
        assert!(parse_config("experiment = ssm_nce_equiv\nsweep.values = 0\n").is_err());
    }

    #[test]
    fn family_data_mismatch_is_a_config_error() {
        let e = parse_config("experiment = gaussian_recovery\nfamily = poly\ndata.dim = 2\n").unwrap_err();
        assert!(e.to_string().contains("data.dim"), "{e}");
        let e = parse_config(
            "experiment = gaussian_recovery\nfamily = mlp\nfamily.dim = 2\ndata.dim = 2\nestimator = sm\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("limited to 64"), "{e}");
        assert!(parse_config(
            "experiment = gaussian_recovery\nfamily = mlp\nfamily.dim = 2\ndata.dim = 2\nestimator = cd\n"
        )
        .is_ok());
    }
}
