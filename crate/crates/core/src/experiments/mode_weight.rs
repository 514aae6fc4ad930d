//! Two-mode weight recovery: single-scale SM cannot see the mixture weight
//! when the modes are nearly disjoint; noise-conditional DSM plus annealed
//! Langevin can.

use super::config::ExperimentConfig;
use super::csvout::MetricRow;
use super::train::{optimize, sample_data, sample_two_mode};
use super::ExperimentOutput;
use crate::energy::{EnergyFamily, ParamVector};
use crate::error::Result;
use crate::estimators::{dsm_loss, sm_loss};
use crate::numerics::{RealVector, RngStream};
use crate::samplers::{annealed_langevin, fresh_init, langevin_chain, LangevinConfig, ModelTarget, NoiseSchedule};

/// Allowed |π̂ − π| for the multi-scale path.
pub const WEIGHT_TOLERANCE: f64 = 0.1;

fn basin_fraction(draws: &[RealVector]) -> f64 {
    draws.iter().filter(|x| x[0] > 0.0).count() as f64 / draws.len() as f64
}

fn softmax_weight_of_positive_mode(theta: &ParamVector) -> f64 {
    let v = theta.values();
    // θ = (logit₀, logit₁, mean₀, mean₁, log_scale₀, log_scale₁)
    let (w0, w1) = (v[0].exp(), v[1].exp());
    let pos = if v[3] > v[2] { w1 } else { w0 };
    pos / (w0 + w1)
}

/// The true noise-convolved mixture at level σ, as a mixture θ.
fn truth_theta(family: &EnergyFamily, cfg: &ExperimentConfig, sigma: f64) -> Result<ParamVector> {
    let d = &cfg.data;
    let s = (d.mode_std * d.mode_std + sigma * sigma).sqrt();
    family.mixture_params(&[1.0 - d.weight, d.weight], &[-d.mode_mean, d.mode_mean], &[s, s])
}

fn annealed_draws(
    family: &EnergyFamily,
    per_level: &[ParamVector],
    schedule: &NoiseSchedule,
    cfg: &ExperimentConfig,
    rng: &RngStream,
) -> Result<Vec<RealVector>> {
    let a = &cfg.anneal;
    let per_level_cfg = LangevinConfig::new(a.base_step, a.steps_per_level, false)?;
    let sigmas = schedule.sigmas();
    let score = |y: &[f64], sigma: f64, out: &mut [f64]| {
        let l = sigmas.iter().position(|s| *s == sigma).unwrap_or(sigmas.len() - 1);
        family.grad_x_raw(per_level[l].values(), y, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
    };
    (0..a.draws)
        .map(|i| {
            let mut r = rng.split(i as u64);
            let x0 = fresh_init(&mut r, 1);
            Ok(annealed_langevin(1, score, schedule, &per_level_cfg, &x0, &mut r)?.final_state)
        })
        .collect()
}

fn single_scale_draws(
    family: &EnergyFamily,
    theta: &ParamVector,
    cfg: &ExperimentConfig,
    rng: &RngStream,
) -> Result<Vec<RealVector>> {
    let a = &cfg.anneal;
    let lc = LangevinConfig::new(a.base_step, a.steps_per_level * a.levels, false)?;
    let target = ModelTarget::new(family, theta)?;
    (0..a.draws)
        .map(|i| {
            let mut r = rng.split(i as u64);
            let x0 = fresh_init(&mut r, 1);
            Ok(langevin_chain(&target, &x0, &lc, &mut r, false)?.final_state)
        })
        .collect()
}

/// Runs both training paths and all samplers; see the module docs.
pub fn mode_weight(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let root = RngStream::new(cfg.seed);
    let data = sample_data(&cfg.data, &mut root.split(1))?;
    let schedule = NoiseSchedule::geometric(cfg.anneal.sigma_max, cfg.anneal.sigma_min, cfg.anneal.levels)?;
    let init = family.mixture_params(&[0.5, 0.5], &[-1.0, 1.0], &[1.0, 1.0])?;
    let batch_size = cfg.estimator.batch_size.clamp(1, data.len());
    let frozen = vec![false; family.param_count()];

    // Path (b): one model per noise level, each warm-started from the last.
    let mut per_level = Vec::new();
    let mut rows = Vec::new();
    let mut theta = init.clone();
    let mut train_rng = root.split(2);
    for (l, &sigma) in schedule.sigmas().iter().enumerate() {
        let mut batch = Vec::with_capacity(batch_size);
        let trace = optimize(theta, cfg.steps, &cfg.optimizer, &frozen, cfg.record_wall_time, |th, _| {
            batch.clear();
            batch.extend((0..batch_size).map(|_| data[train_rng.index(data.len())].clone()));
            dsm_loss(&family, th, &batch, sigma, &mut train_rng)
        })?;
        for r in &trace.rows {
            let mut row = vec![1.0, l as f64, sigma];
            row.extend_from_slice(&r[..2 + family.param_count()]);
            rows.push(row);
        }
        theta = trace.theta;
        per_level.push(theta.clone());
    }

    // Path (a): plain SM for the same total number of steps.
    let mut batch = Vec::with_capacity(batch_size);
    let sm_trace =
        optimize(init, cfg.steps * cfg.anneal.levels, &cfg.optimizer, &frozen, cfg.record_wall_time, |th, _| {
            batch.clear();
            batch.extend((0..batch_size).map(|_| data[train_rng.index(data.len())].clone()));
            sm_loss(&family, th, &batch)
        })?;
    for r in &sm_trace.rows {
        let mut row = vec![0.0, f64::NAN, f64::NAN];
        row.extend_from_slice(&r[..2 + family.param_count()]);
        rows.push(row);
    }

    let multi = basin_fraction(&annealed_draws(&family, &per_level, &schedule, cfg, &root.split(3))?);
    let plain = basin_fraction(&single_scale_draws(&family, &sm_trace.theta, cfg, &root.split(4))?);

    let truth_levels: Vec<ParamVector> =
        schedule.sigmas().iter().map(|s| truth_theta(&family, cfg, *s)).collect::<Result<_>>()?;
    let truth_annealed = basin_fraction(&annealed_draws(&family, &truth_levels, &schedule, cfg, &root.split(5))?);
    let truth_clean = truth_theta(&family, cfg, 0.0)?;
    let truth_single = basin_fraction(&single_scale_draws(&family, &truth_clean, cfg, &root.split(6))?);
    let mut r = root.split(7);
    let direct: Vec<RealVector> = (0..cfg.anneal.draws).map(|_| sample_two_mode(&cfg.data, &mut r)).collect();
    let direct = basin_fraction(&direct);

    let pi = cfg.data.weight;
    let binom = 3.0 * (pi * (1.0 - pi) / cfg.anneal.draws as f64).sqrt();
    let err_multi = (multi - pi).abs();
    let summary = vec![
        MetricRow::info("pi_true", pi),
        MetricRow::check(
            "truth_direct_fraction_abs_err",
            (direct - pi).abs(),
            format!("< {binom:.4}"),
            (direct - pi).abs() < binom,
        ),
        MetricRow::info("truth_annealed_fraction", truth_annealed),
        MetricRow::info("truth_single_scale_fraction", truth_single),
        MetricRow::info("multiscale_fraction", multi),
        MetricRow::info(
            "multiscale_model_weight",
            softmax_weight_of_positive_mode(per_level.last().expect("levels >= 1")),
        ),
        MetricRow::check(
            "multiscale_abs_err",
            err_multi,
            format!("< {WEIGHT_TOLERANCE}"),
            err_multi < WEIGHT_TOLERANCE,
        ),
        MetricRow::info("plain_sm_fraction", plain),
        MetricRow::info("plain_sm_model_weight", softmax_weight_of_positive_mode(&sm_trace.theta)),
        MetricRow::info("plain_sm_abs_err", (plain - pi).abs()),
    ];
    let mut header: Vec<String> = ["path", "level", "sigma", "step", "loss"].iter().map(|s| s.to_string()).collect();
    header.extend(family.params(vec![0.0; family.param_count()])?.names());
    Ok(ExperimentOutput { header, rows, summary })
}
