//! The invariant and oracle suite behind `ebm check`.
//!
//! Each group returns exactly the rows declared for it in [`PROPERTIES`], so
//! the report row count always equals the documented property count for the
//! selected groups.

use std::path::PathBuf;
use std::time::Instant;

use super::config::{EstimatorKind, Experiment, ExperimentConfig};
use super::csvout::{write_metrics, MetricRow};
use super::{execute, train};
use crate::energy::{
    energy, fisher_grad_theta_gaussian1, grad_theta_energy, hvp_x, score, EnergyFamily, GaussianDensity, ParamVector,
};
use crate::error::{EbmError, Result};
use crate::estimators::{
    cd_gradient_from_samples, dsm_loss, estimator_grad_theta, ksd_estimate, shifted_nce_loss, sm_loss, sm_loss_signed,
    ssm_loss, HessianSign, Moments, Projection, SliceConfig,
};
use crate::numerics::{finite_diff_gradient, rel_error, RealVector, RngStream};
use crate::samplers::{langevin_chain, mala_log_accept_ratio, LangevinConfig, ModelTarget, ReplayBuffer};

/// One documented property of the suite.
#[derive(Debug, Clone, Copy)]
pub struct Property {
    pub group: &'static str,
    pub name: &'static str,
    pub about: &'static str,
}

macro_rules! props {
    ($($group:literal { $($name:literal => $about:literal,)* })*) => {
        &[$($(Property { group: $group, name: $name, about: $about },)*)*]
    };
}

/// Every row the full suite reports, in order.
pub const PROPERTIES: &[Property] = props! {
    "gradient_oracle" {
        "score_fd_gaussian" => "max rel. error of the score vs central differences of E, 100 configs",
        "score_fd_mixture" => "same, isotropic mixture",
        "score_fd_poly" => "same, 1-D polynomial",
        "score_fd_mlp" => "same, MLP",
        "grad_theta_fd_gaussian" => "max rel. error of dE/dθ vs central differences, 100 configs",
        "grad_theta_fd_mixture" => "same, isotropic mixture",
        "grad_theta_fd_poly" => "same, 1-D polynomial",
        "grad_theta_fd_mlp" => "same, MLP",
        "hvp_fd_gaussian" => "max rel. error of the HVP vs central differences of the gradient, 100 configs",
        "hvp_fd_mixture" => "same, isotropic mixture",
        "hvp_fd_poly" => "same, 1-D polynomial",
        "hvp_fd_mlp" => "same, MLP",
        "estimator_grad_fd" => "max rel. error of analytic estimator θ-gradients vs CRN finite differences, 20 configs",
    }
    "fisher_sign" {
        "sm_grad_max_z" => "max |∇θ sm_loss − ∇θ D_F| / SE over 10 Gaussian pairs at 1e5 samples",
        "flipped_sign_min_z" => "the same statistic with the Hessian sign flipped; each pair must exceed 3",
    }
    "consistency" {
        "sm_abs_err_mu" => "SM recovery of the mean of N(1, 2²)",
        "sm_abs_err_sigma" => "SM recovery of the std",
        "ssm_abs_err_mu" => "SSM (64 slices) recovery of the mean",
        "ssm_abs_err_sigma" => "SSM recovery of the std",
        "nce_abs_err_mu" => "NCE recovery of the mean",
        "nce_abs_err_sigma" => "NCE recovery of the std",
        "cd_abs_err_mu" => "CD-Langevin recovery of the mean",
        "cd_abs_err_sigma" => "CD-Langevin recovery of the std",
        "dsm_abs_err_var_noisy" => "DSM at σ = 0.5 recovers the noisy variance 4.25",
    }
    "nce_partition" {
        "abs_err_c" => "learned c vs ½ ln 2π",
        "self_normalized_abs_log_z" => "quadrature log Z of the self-normalized model",
    }
    "control_variate" {
        "variance_ratio_sigma_0.01" => "CV variance over plain variance at σ = 0.01",
        "cv_mean_z_sigma_0.01" => "control variate mean in SE units at σ = 0.01",
        "variance_ratio_sigma_10" => "CV variance over plain variance at σ = 10 (recorded)",
        "cv_mean_z_sigma_10" => "control variate mean in SE units at σ = 10",
    }
    "ssm_unbiased" {
        "gaussian_z" => "|slice average − sm_loss| / SE, Gaussian projections, 1e5 slices",
        "rademacher_z" => "same, Rademacher projections",
        "gaussian_vr_z" => "same, variance-reduced form with Gaussian projections",
        "rademacher_vr_z" => "same, variance-reduced form with Rademacher projections",
    }
    "cd_sm" {
        "cosine_at_eps_0.01" => "cosine of one-step CD and Fisher gradients at ε = 0.01",
        "ratio_trend_violations" => "steps where the ε² ratio moves away from 1 by more than the slack",
    }
    "de_bruijn" {
        "rel_gap_t_0.1" => "relative gap of d/dt KL and −D_F at t = 0.1",
        "rel_gap_t_0.5" => "same at t = 0.5",
        "rel_gap_t_1" => "same at t = 1",
        "identical_pair_max_abs" => "both sides for identical distributions",
        "fd_order_shrink" => "gap reduction when the difference step shrinks 10×",
    }
    "nce_ssm_taylor" {
        "gap_over_norm2_strictly_decreasing" => "gap / ‖v‖² decreases over 4 halvings",
        "flat_energy_max_gap" => "gap for an energy with no x-dependence",
        "zero_shift_rejected" => "v = 0 is an error",
    }
    "samplers" {
        "ula_mean_abs_err_gaussian" => "ULA sample mean, unit Gaussian energy, ε = 0.01, K = 5000, 1e4 chains",
        "ula_variance_gaussian" => "ULA sample variance, same setup",
        "ula_mean_abs_err_mixture" => "ULA mean, one-component mixture at N(0, 1)",
        "ula_variance_mixture" => "ULA variance, same",
        "ula_mean_abs_err_poly" => "ULA mean, quadratic polynomial x²/2",
        "ula_variance_poly" => "ULA variance, same",
        "mala_variance_eps_0.5" => "MALA variance at ε = 0.5, 1e5 chains",
        "ula_variance_eps_0.5" => "ULA variance at ε = 0.5 for comparison (recorded)",
        "mala_accept_rate_eps_0.1" => "MALA acceptance rate at ε = 0.1",
        "energy_shift_max_abs_diff" => "MALA final states with and without a constant added to E",
    }
    "ksd" {
        "null_abs_z" => "|KSD| / SE for matched model and data, 1e4 points",
        "alternative_z" => "KSD / SE for data shifted by 0.5",
    }
    "mode_weight" {
        "truth_direct_fraction_abs_err" => "positive-basin fraction of direct draws from the true mixture",
        "multiscale_abs_err" => "|π̂ − π| for multi-scale DSM with annealed Langevin",
        "plain_sm_abs_err" => "|π̂ − π| for plain SM with single-scale Langevin (recorded)",
    }
    "misc" {
        "buffer_distinct_insertion_indices" => "distinct survivors after 1e4 pushes at capacity 100",
        "chain_determinism_max_diff" => "two chains from cloned streams",
        "cd_identical_samples_grad_norm" => "CD gradient when samples equal data",
        "mala_self_proposal_log_ratio" => "log acceptance ratio for x' = x",
    }
};

/// Group names in suite order.
pub fn groups() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for p in PROPERTIES {
        if !out.contains(&p.group) {
            out.push(p.group);
        }
    }
    out
}

/// Options for [`run_check_suite`].
#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    /// Run only groups whose name contains this string.
    pub filter: Option<String>,
    /// Debug: use the `+` Hessian sign in the Fisher-oracle test. The suite
    /// is expected to fail.
    pub flip_sm_sign: bool,
    /// Where `report.csv` goes; defaults to `<output root>/check`.
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
}

/// Rows and timing of one group.
#[derive(Debug, Clone)]
pub struct GroupResult {
    pub group: &'static str,
    pub rows: Vec<MetricRow>,
    pub seconds: f64,
}

impl GroupResult {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(MetricRow::passed)
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub groups: Vec<GroupResult>,
    pub path: PathBuf,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(GroupResult::passed)
    }

    pub fn row_count(&self) -> usize {
        self.groups.iter().map(|g| g.rows.len()).sum()
    }
}

/// Runs the selected groups and writes `report.csv` with columns
/// `property,value,tolerance,flag`, where property is `group.name`.
pub fn run_check_suite(opts: &CheckOptions) -> Result<CheckReport> {
    let selected: Vec<&'static str> =
        groups().into_iter().filter(|g| opts.filter.as_deref().is_none_or(|f| g.contains(f))).collect();
    if selected.is_empty() {
        return Err(EbmError::config(
            None,
            format!(
                "no check group matches {:?}; groups are: {}",
                opts.filter.as_deref().unwrap_or(""),
                groups().join(", ")
            ),
        ));
    }
    let mut results = Vec::new();
    for g in selected {
        results.push(run_group(g, opts)?);
    }
    let dir = opts.out_dir.clone().unwrap_or_else(|| super::default_output_root().join("check"));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("report.csv");
    let rows: Vec<MetricRow> = results
        .iter()
        .flat_map(|g| g.rows.iter().map(move |r| MetricRow { name: format!("{}.{}", g.group, r.name), ..r.clone() }))
        .collect();
    write_metrics(&path, "property", &rows)?;
    Ok(CheckReport { groups: results, path })
}

/// Runs one group by name and checks its rows against [`PROPERTIES`].
pub fn run_group(group: &str, opts: &CheckOptions) -> Result<GroupResult> {
    let start = Instant::now();
    let seed = opts.seed;
    let rows = match group {
        "gradient_oracle" => gradient_oracle(seed)?,
        "fisher_sign" => fisher_sign(seed, opts.flip_sm_sign)?,
        "consistency" => consistency(seed)?,
        "nce_partition" => from_experiment(Experiment::NcePartition, seed, group)?,
        "control_variate" => from_experiment(Experiment::ControlVariate, seed, group)?,
        "ssm_unbiased" => ssm_unbiased(seed)?,
        "cd_sm" => from_experiment(Experiment::CdSmConnection, seed, group)?,
        "de_bruijn" => de_bruijn(seed)?,
        "nce_ssm_taylor" => nce_ssm_taylor(seed)?,
        "samplers" => samplers(seed)?,
        "ksd" => ksd_group(seed)?,
        "mode_weight" => from_experiment(Experiment::ModeWeight, seed, group)?,
        "misc" => misc(seed)?,
        other => {
            return Err(EbmError::config(
                None,
                format!("unknown check group {other:?}; groups are: {}", groups().join(", ")),
            ))
        }
    };
    let group = groups().into_iter().find(|g| *g == group).expect("matched above");
    let declared: Vec<&str> = PROPERTIES.iter().filter(|p| p.group == group).map(|p| p.name).collect();
    let got: Vec<&str> = rows.iter().map(|r| r.name.as_str()).collect();
    if declared != got {
        return Err(EbmError::invalid(format!("group {group} reported {got:?}, documented {declared:?}")));
    }
    Ok(GroupResult { group, rows, seconds: start.elapsed().as_secs_f64() })
}

fn names_of(group: &str) -> impl Iterator<Item = &'static str> + '_ {
    PROPERTIES.iter().filter(move |p| p.group == group).map(|p| p.name)
}

/// Pulls the documented rows out of an experiment's summary.
fn from_experiment(exp: Experiment, seed: u64, group: &str) -> Result<Vec<MetricRow>> {
    let mut cfg = ExperimentConfig::defaults(exp);
    cfg.seed = seed;
    let out = execute(&cfg)?;
    names_of(group)
        .map(|name| {
            out.metric(name).cloned().ok_or_else(|| EbmError::invalid(format!("{exp} summary has no metric {name}")))
        })
        .collect()
}

fn lt(name: &str, value: f64, tol: f64) -> MetricRow {
    MetricRow::check(name, value, format!("< {tol:e}"), value < tol)
}

// ---------------------------------------------------------------- gradients

const ORACLE_CONFIGS: usize = 100;
const ORACLE_H: f64 = 1e-5;

fn oracle_families() -> Result<Vec<(&'static str, EnergyFamily)>> {
    Ok(vec![
        ("gaussian", EnergyFamily::gaussian(3)?),
        ("mixture", EnergyFamily::mixture_rbf(3, 2)?),
        ("poly", EnergyFamily::poly1d(4)?),
        ("mlp", EnergyFamily::mlp(2, &[16, 16])?),
    ])
}

fn random_point(rng: &mut RngStream, d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    rng.fill_normal(&mut x);
    x.iter().map(|v| 1.5 * v).collect()
}

/// Max relative errors (score, grad_theta, hvp) over random configurations.
fn family_oracle_errors(family: &EnergyFamily, rng: &mut RngStream) -> Result<[f64; 3]> {
    let d = family.dim();
    let mut worst = [0.0f64; 3];
    for _ in 0..ORACLE_CONFIGS {
        let theta = family.random_params(rng);
        let x = random_point(rng, d);
        let mut v = vec![0.0; d];
        rng.fill_normal(&mut v);

        let fd = finite_diff_gradient(|y| energy(family, &theta, y), &x, ORACLE_H)?;
        let neg: Vec<f64> = fd.iter().map(|g| -g).collect();
        worst[0] = worst[0].max(rel_error(&score(family, &theta, &x)?, &neg));

        let fd =
            finite_diff_gradient(|t| energy(family, &theta.with_values(t.to_vec())?, &x), theta.values(), ORACLE_H)?;
        worst[1] = worst[1].max(rel_error(&grad_theta_energy(family, &theta, &x)?, &fd));

        // directional difference of ∇ₓE = −score along v
        let mut up = x.clone();
        let mut down = x.clone();
        for i in 0..d {
            up[i] += ORACLE_H * v[i];
            down[i] -= ORACLE_H * v[i];
        }
        let (su, sd) = (score(family, &theta, &up)?, score(family, &theta, &down)?);
        let fd: Vec<f64> = (0..d).map(|i| -(su[i] - sd[i]) / (2.0 * ORACLE_H)).collect();
        worst[2] = worst[2].max(rel_error(&hvp_x(family, &theta, &x, &v)?, &fd));
    }
    Ok(worst)
}

/// Max relative error between analytic estimator gradients and CRN finite
/// differences of the same loss.
fn estimator_gradient_error(rng: &mut RngStream) -> Result<f64> {
    let families = [EnergyFamily::gaussian(2)?, EnergyFamily::poly1d(4)?];
    let slices = SliceConfig { projection: Projection::Gaussian, num_slices: 4, variance_reduced: false };
    let mut worst = 0.0f64;
    for cfg in 0..20 {
        let family = &families[cfg % 2];
        let theta = family.random_params(rng);
        let batch: Vec<RealVector> = (0..50).map(|_| RealVector::from_raw(random_point(rng, family.dim()))).collect();
        let stream = rng.split(cfg as u64);
        let (analytic, fd) = match (cfg / 2) % 3 {
            0 => (
                sm_loss(family, &theta, &batch)?.grad_theta,
                estimator_grad_theta(family, &theta, |t, _| Ok(sm_loss(family, t, &batch)?.loss), &stream)?,
            ),
            1 => (
                ssm_loss(family, &theta, &batch, &slices, &mut stream.clone())?.grad_theta,
                estimator_grad_theta(
                    family,
                    &theta,
                    |t, r| Ok(ssm_loss(family, t, &batch, &slices, r)?.loss),
                    &stream,
                )?,
            ),
            _ => (
                dsm_loss(family, &theta, &batch, 0.3, &mut stream.clone())?.grad_theta,
                estimator_grad_theta(family, &theta, |t, r| Ok(dsm_loss(family, t, &batch, 0.3, r)?.loss), &stream)?,
            ),
        };
        worst = worst.max(rel_error(&analytic, &fd));
    }
    Ok(worst)
}

fn gradient_oracle(seed: u64) -> Result<Vec<MetricRow>> {
    let root = RngStream::new(seed).split(101);
    let mut errs = Vec::new();
    for (i, (name, family)) in oracle_families()?.into_iter().enumerate() {
        errs.push((name, family_oracle_errors(&family, &mut root.split(i as u64))?));
    }
    let mut rows = Vec::new();
    for (k, (kind, tol)) in [("score_fd", 1e-5), ("grad_theta_fd", 1e-5), ("hvp_fd", 1e-4)].into_iter().enumerate() {
        for (name, e) in &errs {
            rows.push(lt(&format!("{kind}_{name}"), e[k], tol));
        }
    }
    rows.push(lt("estimator_grad_fd", estimator_gradient_error(&mut root.split(99))?, 1e-5));
    Ok(rows)
}

// ------------------------------------------------------------- fisher sign

const FISHER_PAIRS: usize = 10;
const FISHER_SAMPLES: usize = 100_000;

/// Max over components of |mean per-sample gradient − oracle| / SE.
pub fn fisher_z(
    family: &EnergyFamily,
    theta: &ParamVector,
    data: &[RealVector],
    oracle: &[f64],
    sign: HessianSign,
) -> Result<f64> {
    let mut moms = vec![Moments::default(); oracle.len()];
    for chunk in data.chunks(1) {
        let g = sm_loss_signed(family, theta, chunk, sign)?.grad_theta;
        for (m, v) in moms.iter_mut().zip(g.iter()) {
            m.push(*v);
        }
    }
    Ok(moms.iter().zip(oracle).map(|(m, o)| (m.mean() - o).abs() / m.std_error()).fold(0.0, f64::max))
}

fn fisher_sign(seed: u64, flip: bool) -> Result<Vec<MetricRow>> {
    let family = EnergyFamily::gaussian(1)?;
    let root = RngStream::new(seed).split(102);
    let primary = if flip { HessianSign::Plus } else { HessianSign::Minus };
    let (mut worst, mut weakest_flip) = (0.0f64, f64::INFINITY);
    for pair in 0..FISHER_PAIRS {
        let mut rng = root.split(pair as u64);
        let theta = family.random_params(&mut rng);
        let mean = rng.standard_normal();
        let std = (0.3 * rng.standard_normal()).exp();
        let density = GaussianDensity::isotropic(1, mean, std)?;
        let data = density.sample_n(&mut rng, FISHER_SAMPLES);
        let oracle = fisher_grad_theta_gaussian1(&family, &theta, &density)?;
        worst = worst.max(fisher_z(&family, &theta, &data, &oracle, primary)?);
        weakest_flip = weakest_flip.min(fisher_z(&family, &theta, &data, &oracle, HessianSign::Plus)?);
    }
    Ok(vec![
        MetricRow::check("sm_grad_max_z", worst, "< 3", worst < 3.0),
        MetricRow::check("flipped_sign_min_z", weakest_flip, "> 3", weakest_flip > 3.0),
    ])
}

// ------------------------------------------------------------- consistency

fn consistency(seed: u64) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for kind in [EstimatorKind::Sm, EstimatorKind::Ssm, EstimatorKind::Nce, EstimatorKind::Cd, EstimatorKind::Dsm] {
        let mut cfg = ExperimentConfig::defaults(Experiment::GaussianRecovery);
        cfg.seed = seed;
        cfg.estimator.kind = kind;
        if matches!(kind, EstimatorKind::Ssm | EstimatorKind::Cd) {
            cfg.estimator.batch_size = 1000;
        }
        let out = train::train(&cfg)?;
        let wanted: &[&str] =
            if kind == EstimatorKind::Dsm { &["abs_err_var_noisy"] } else { &["abs_err_mu", "abs_err_sigma"] };
        for w in wanted {
            let row = out
                .summary
                .iter()
                .find(|r| r.name == *w)
                .ok_or_else(|| EbmError::invalid(format!("{kind} summary has no {w}")))?;
            rows.push(MetricRow { name: format!("{kind}_{w}"), ..row.clone() });
        }
    }
    Ok(rows)
}

// ------------------------------------------------------------ ssm unbiased

const SSM_SLICES: usize = 100_000;

fn ssm_unbiased(seed: u64) -> Result<Vec<MetricRow>> {
    let family = EnergyFamily::gaussian(3)?;
    let root = RngStream::new(seed).split(103);
    let mut rng = root.split(0);
    let theta = family.random_params(&mut rng);
    let batch: Vec<RealVector> = (0..20).map(|_| RealVector::from_raw(random_point(&mut rng, 3))).collect();
    let reference = sm_loss(&family, &theta, &batch)?.loss;
    let mut rows = Vec::new();
    for (k, (name, projection, vr)) in [
        ("gaussian_z", Projection::Gaussian, false),
        ("rademacher_z", Projection::Rademacher, false),
        ("gaussian_vr_z", Projection::Gaussian, true),
        ("rademacher_vr_z", Projection::Rademacher, true),
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = SliceConfig { projection, num_slices: SSM_SLICES, variance_reduced: vr };
        let rep = ssm_loss(&family, &theta, &batch, &cfg, &mut root.split(k as u64 + 1))?;
        let se = rep.aux("slice_se").unwrap_or(f64::NAN);
        let z = (rep.loss - reference).abs() / se;
        rows.push(MetricRow::check(name, z, "< 3", z < 3.0));
    }
    Ok(rows)
}

// -------------------------------------------------------------- de Bruijn

fn de_bruijn(seed: u64) -> Result<Vec<MetricRow>> {
    let mut cfg = ExperimentConfig::defaults(Experiment::DeBruijn);
    cfg.seed = seed;
    let out = execute(&cfg)?;
    let mut rows: Vec<MetricRow> = ["rel_gap_t_0.1", "rel_gap_t_0.5", "rel_gap_t_1"]
        .iter()
        .map(|n| out.metric(n).cloned().ok_or_else(|| EbmError::invalid(format!("de_bruijn summary has no {n}"))))
        .collect::<Result<_>>()?;
    let q = GaussianDensity::isotropic(1, cfg.data.mean, cfg.data.std)?;
    let p = GaussianDensity::isotropic(1, cfg.model.mean, cfg.model.std)?;
    let same = super::studies::de_bruijn_point(&q, &q, 0.5, cfg.sweep.fd_step)?;
    let both = same[1].abs().max(same[2].abs());
    rows.push(MetricRow::check("identical_pair_max_abs", both, "< 1e-12", both < 1e-12));
    let a = super::studies::de_bruijn_point(&q, &p, 0.5, 0.05)?;
    let b = super::studies::de_bruijn_point(&q, &p, 0.5, 0.005)?;
    let shrink = (a[1] - a[2]).abs() / (b[1] - b[2]).abs();
    rows.push(MetricRow::check("fd_order_shrink", shrink, "in [50, 200]", (50.0..=200.0).contains(&shrink)));
    Ok(rows)
}

// ----------------------------------------------------------- NCE ↔ SSM

fn nce_ssm_taylor(seed: u64) -> Result<Vec<MetricRow>> {
    let mut cfg = ExperimentConfig::defaults(Experiment::SsmNceEquiv);
    cfg.seed = seed;
    let out = execute(&cfg)?;
    let mono = out
        .metric("gap_over_norm2_strictly_decreasing")
        .cloned()
        .ok_or_else(|| EbmError::invalid("ssm_nce_equiv summary has no monotonicity row"))?;
    let flat = EnergyFamily::poly1d(2)?;
    let th = flat.poly_params(&[1.0, 0.0, 1e-300])?;
    let batch = GaussianDensity::isotropic(1, 0.0, 1.0)?.sample_n(&mut RngStream::new(seed).split(104), 1000);
    let gap = super::studies::taylor_rows(&flat, &th, &batch, &cfg.sweep.values)?
        .iter()
        .map(|r| r[3].abs())
        .fold(0.0, f64::max);
    let rejected = shifted_nce_loss(&flat, &th, &batch, &[0.0]).is_err();
    Ok(vec![
        mono,
        MetricRow::check("flat_energy_max_gap", gap, "< 1e-12", gap < 1e-12),
        MetricRow::check("zero_shift_rejected", f64::from(u8::from(rejected)), "== 1", rejected),
    ])
}

// ---------------------------------------------------------------- samplers

const ULA_CHAINS: usize = 10_000;
const ULA_STEPS: usize = 5_000;
const MALA_CHAINS: usize = 100_000;
const MALA_STEPS: usize = 50;

fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let mut m = Moments::default();
    for x in xs {
        m.push(*x);
    }
    (m.mean(), m.variance())
}

/// Final states of independent chains started from `starts`.
fn finals(target: &ModelTarget, starts: &[f64], cfg: &LangevinConfig, rng: &RngStream) -> Result<Vec<f64>> {
    starts
        .iter()
        .enumerate()
        .map(|(i, x0)| Ok(langevin_chain(target, &[*x0], cfg, &mut rng.split(i as u64), false)?.final_state[0]))
        .collect()
}

fn unit_gaussians() -> Result<Vec<(&'static str, EnergyFamily, ParamVector)>> {
    let g = EnergyFamily::gaussian(1)?;
    let m = EnergyFamily::mixture_rbf(1, 1)?;
    let p = EnergyFamily::poly1d(2)?;
    Ok(vec![
        ("gaussian", g.clone(), g.gaussian_params(&[0.0], &[1.0])?),
        ("mixture", m.clone(), m.mixture_params(&[1.0], &[0.0], &[1.0])?),
        ("poly", p.clone(), p.poly_params(&[0.0, 0.0, 0.5])?),
    ])
}

fn samplers(seed: u64) -> Result<Vec<MetricRow>> {
    let root = RngStream::new(seed).split(105);
    let mut rows = Vec::new();
    // stationarity: chains start in the target
    let mut r = root.split(0);
    let starts: Vec<f64> = (0..ULA_CHAINS).map(|_| r.standard_normal()).collect();
    let ula = LangevinConfig::new(0.01, ULA_STEPS, false)?;
    for (k, (name, family, theta)) in unit_gaussians()?.iter().enumerate() {
        let target = ModelTarget::new(family, theta)?;
        let (mean, var) = sample_moments(&finals(&target, &starts, &ula, &root.split(10 + k as u64))?);
        rows.push(MetricRow::check(format!("ula_mean_abs_err_{name}"), mean.abs(), "< 0.05", mean.abs() < 0.05));
        rows.push(MetricRow::check(format!("ula_variance_{name}"), var, "in [0.9, 1.1]", (0.9..=1.1).contains(&var)));
    }

    let family = EnergyFamily::gaussian(1)?;
    let theta = family.gaussian_params(&[0.0], &[1.0])?;
    let target = ModelTarget::new(&family, &theta)?;
    let mut r = root.split(1);
    // over-dispersed starts, N(0, 4)
    let starts: Vec<f64> = (0..MALA_CHAINS).map(|_| 2.0 * r.standard_normal()).collect();
    let (_, var) =
        sample_moments(&finals(&target, &starts, &LangevinConfig::new(0.5, MALA_STEPS, true)?, &root.split(2))?);
    rows.push(MetricRow::check("mala_variance_eps_0.5", var, "in [0.95, 1.05]", (0.95..=1.05).contains(&var)));
    let (_, var) =
        sample_moments(&finals(&target, &starts, &LangevinConfig::new(0.5, MALA_STEPS, false)?, &root.split(2))?);
    rows.push(MetricRow::info("ula_variance_eps_0.5", var));

    let cfg = LangevinConfig::new(0.1, 200, true)?;
    let (mut acc, mut total) = (0, 0);
    for i in 0..1000 {
        let out = langevin_chain(&target, &[starts[i] / 2.0], &cfg, &mut root.split(1000 + i as u64), false)?;
        acc += out.accepted;
        total += out.steps;
    }
    let rate = acc as f64 / total as f64;
    rows.push(MetricRow::check("mala_accept_rate_eps_0.1", rate, "in (0.5, 1)", rate > 0.5 && rate < 1.0));

    let poly = EnergyFamily::poly1d(2)?;
    let base = poly.poly_params(&[0.0, 0.3, 0.5])?;
    let shifted = poly.poly_params(&[7.25, 0.3, 0.5])?;
    let cfg = LangevinConfig::new(0.5, 100, true)?;
    let a = finals(&ModelTarget::new(&poly, &base)?, &starts[..1000], &cfg, &root.split(3))?;
    let b = finals(&ModelTarget::new(&poly, &shifted)?, &starts[..1000], &cfg, &root.split(3))?;
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    rows.push(MetricRow::check("energy_shift_max_abs_diff", diff, "== 0", diff == 0.0));
    Ok(rows)
}

// --------------------------------------------------------------------- KSD

const KSD_POINTS: usize = 10_000;

fn ksd_group(seed: u64) -> Result<Vec<MetricRow>> {
    let family = EnergyFamily::gaussian(1)?;
    let theta = family.gaussian_params(&[0.0], &[1.0])?;
    let root = RngStream::new(seed).split(106);
    let null = GaussianDensity::isotropic(1, 0.0, 1.0)?.sample_n(&mut root.split(0), KSD_POINTS);
    let alt = GaussianDensity::isotropic(1, 0.5, 1.0)?.sample_n(&mut root.split(1), KSD_POINTS);
    let n = ksd_estimate(&family, &theta, &null, 1.0)?;
    let a = ksd_estimate(&family, &theta, &alt, 1.0)?;
    let (zn, za) = (n.value.abs() / n.std_error, a.value / a.std_error);
    Ok(vec![
        MetricRow::check("null_abs_z", zn, "< 3", zn < 3.0),
        MetricRow::check("alternative_z", za, "> 5", za > 5.0),
    ])
}

// -------------------------------------------------------------------- misc

fn misc(seed: u64) -> Result<Vec<MetricRow>> {
    let root = RngStream::new(seed).split(107);
    let mut buffer = ReplayBuffer::new(100, 0.05)?;
    let mut r = root.split(0);
    for i in 0..10_000 {
        buffer.push(RealVector::from_raw(vec![i as f64]), &mut r)?;
    }
    let mut idx = buffer.insertion_indices();
    idx.sort_unstable();
    idx.dedup();
    let distinct = idx.len() as f64;

    let family = EnergyFamily::mixture_rbf(2, 1)?;
    let theta = family.mixture_params(&[0.4, 0.6], &[-1.0, 2.0], &[0.7, 1.1])?;
    let target = ModelTarget::new(&family, &theta)?;
    let cfg = LangevinConfig::new(0.3, 500, true)?;
    let s = root.split(1);
    let a = langevin_chain(&target, &[0.1], &cfg, &mut s.clone(), true)?;
    let b = langevin_chain(&target, &[0.1], &cfg, &mut s.clone(), true)?;
    let det = a
        .trajectory
        .iter()
        .flatten()
        .zip(b.trajectory.iter().flatten())
        .map(|(x, y)| (x[0] - y[0]).abs())
        .fold(0.0, f64::max);

    let g = EnergyFamily::gaussian(2)?;
    let th = g.random_params(&mut root.split(2));
    let data = GaussianDensity::isotropic(2, 0.3, 1.2)?.sample_n(&mut root.split(3), 500);
    let cd = cd_gradient_from_samples(&g, &th, &data, &data)?.grad_norm();

    let self_ratio = mala_log_accept_ratio(&target, &[0.7], &[0.7], 0.3)?;
    Ok(vec![
        MetricRow::check("buffer_distinct_insertion_indices", distinct, ">= 10", distinct >= 10.0),
        MetricRow::check("chain_determinism_max_diff", det, "== 0", det == 0.0),
        MetricRow::check("cd_identical_samples_grad_norm", cd, "== 0", cd == 0.0),
        MetricRow::check("mala_self_proposal_log_ratio", self_ratio.abs(), "== 0", self_ratio == 0.0),
    ])
}

/// [`run_group`] at the default seed without the sign flip.
pub fn run_group_default(group: &str) -> Result<GroupResult> {
    run_group(group, &CheckOptions { seed: DEFAULT_SEED, ..CheckOptions::default() })
}

/// Seed used by `ebm check` unless overridden.
pub const DEFAULT_SEED: u64 = 7;
