//! Generic optimizer loop and the config-driven training run.

use std::time::Instant;

use super::config::{DataDist, DataSpec, EstimatorKind, ExperimentConfig, FamilyName, OptimizerSpec, Schedule};
use super::csvout::MetricRow;
use crate::energy::{EnergyFamily, GaussianDensity, ParamVector};
use crate::error::Result;
use crate::estimators::{
    cd_gradient, dsm_cv_loss, dsm_loss, ksd, nce_loss, sm_loss, ssm_loss, CdInit, LossReport, NceConfig, SliceConfig,
};
use crate::numerics::{OptimizerConfig, OptimizerState, RealVector, RngStream};
use crate::samplers::{LangevinConfig, ReplayBuffer};

/// Rows are logged every `LOG_EVERY` steps and at the final step.
pub const LOG_EVERY: usize = 10;

/// Draws the configured dataset.
pub fn sample_data(spec: &DataSpec, rng: &mut RngStream) -> Result<Vec<RealVector>> {
    match spec.dist {
        DataDist::Normal => Ok(GaussianDensity::isotropic(spec.dim, spec.mean, spec.std)?.sample_n(rng, spec.samples)),
        DataDist::Mixture => Ok((0..spec.samples).map(|_| sample_two_mode(spec, rng)).collect()),
    }
}

/// One draw from `π N(m, s²) + (1 − π) N(−m, s²)`: a uniform picks the
/// mode, then one normal.
pub fn sample_two_mode(spec: &DataSpec, rng: &mut RngStream) -> RealVector {
    let sign = if rng.uniform() < spec.weight { 1.0 } else { -1.0 };
    let z = rng.standard_normal();
    RealVector::from_raw(vec![sign * spec.mode_mean + spec.mode_std * z])
}

/// Output of [`optimize`]: final θ plus the logged table.
#[derive(Debug, Clone)]
pub struct Trace {
    pub theta: ParamVector,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub final_loss: f64,
}

fn learning_rate(spec: &OptimizerSpec, step: usize, steps: usize) -> f64 {
    match spec.schedule {
        Schedule::Constant => spec.lr,
        Schedule::Cosine => 0.5 * spec.lr * (1.0 + (std::f64::consts::PI * step as f64 / steps as f64).cos()),
    }
}

/// Runs `steps` Adam updates on `theta` with gradients from `report`.
/// Parameters whose `frozen` flag is set never move. Each logged row holds
/// the loss and gradient norm at the pre-update θ and the post-update θ.
pub fn optimize<F>(
    theta: ParamVector,
    steps: usize,
    spec: &OptimizerSpec,
    frozen: &[bool],
    record_wall_time: bool,
    mut report: F,
) -> Result<Trace>
where
    F: FnMut(&ParamVector, usize) -> Result<LossReport>,
{
    let mut state = OptimizerState::new(
        theta.len(),
        OptimizerConfig { learning_rate: spec.lr, beta1: spec.beta1, beta2: spec.beta2, epsilon: spec.epsilon },
    );
    let start = Instant::now();
    let mut theta = theta;
    let mut header: Vec<String> = vec!["step".into(), "loss".into()];
    header.extend(theta.names());
    header.push("grad_norm".into());
    let mut aux_keys: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    let mut final_loss = f64::NAN;
    for step in 0..steps {
        let r = report(&theta, step)?;
        if step == 0 {
            aux_keys = r.aux.keys().cloned().collect();
            header.extend(aux_keys.iter().cloned());
            header.push("wall_ms".into());
        }
        let mut grad = r.grad_theta.to_vec();
        for (g, f) in grad.iter_mut().zip(frozen) {
            if *f {
                *g = 0.0;
            }
        }
        state = state.with_learning_rate(learning_rate(spec, step, steps));
        let (next, values) = state.update(theta.values(), &grad)?;
        state = next;
        theta = theta.with_values(values)?;
        final_loss = r.loss;
        if step % LOG_EVERY == 0 || step + 1 == steps {
            let mut row = vec![step as f64, r.loss];
            row.extend_from_slice(theta.values());
            row.push(grad.iter().map(|g| g * g).sum::<f64>().sqrt());
            row.extend(aux_keys.iter().map(|k| r.aux(k).unwrap_or(f64::NAN)));
            row.push(if record_wall_time { start.elapsed().as_millis() as f64 } else { 0.0 });
            rows.push(row);
        }
    }
    Ok(Trace { theta, header, rows, final_loss })
}

/// Starting θ: standard normal for Gaussians, `x^degree` for polynomials,
/// a random draw otherwise.
pub fn initial_theta(family: &EnergyFamily, rng: &mut RngStream) -> ParamVector {
    match family.kind() {
        crate::energy::FamilyKind::Gaussian { .. } | crate::energy::FamilyKind::Poly1d { .. } => {
            family.params(vec![0.0; family.param_count()]).expect("zeros are valid")
        }
        _ => family.random_params(rng),
    }
}

/// Result of a config-driven training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub family: EnergyFamily,
    pub trace: Trace,
    pub summary: Vec<MetricRow>,
}

fn pick_batch<'a>(
    data: &'a [RealVector],
    size: usize,
    rng: &mut RngStream,
    buf: &'a mut Vec<RealVector>,
) -> &'a [RealVector] {
    if size == 0 || size >= data.len() {
        return data;
    }
    buf.clear();
    buf.extend((0..size).map(|_| data[rng.index(data.len())].clone()));
    buf
}

/// Trains `cfg.family` on `cfg.data` with `cfg.estimator`.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let family = cfg.family.build()?;
    let root = RngStream::new(cfg.seed);
    let data = sample_data(&cfg.data, &mut root.split(1))?;
    let mut theta = initial_theta(&family, &mut root.split(2));
    let est = &cfg.estimator;
    let nce = matches!(est.kind, EstimatorKind::Nce);
    if nce && est.learn_log_z {
        theta = theta.with_log_z(0.0)?;
    }
    let noise = GaussianDensity::isotropic(family.dim(), est.noise_mean, est.noise_std)?;
    let nce_cfg = NceConfig { nu: est.nu, noise: noise.clone(), learn_log_z: est.learn_log_z };
    let slices =
        SliceConfig { projection: est.projection, num_slices: est.slices, variance_reduced: est.variance_reduced };
    let langevin = LangevinConfig::new(est.step_size, est.langevin_steps, est.mala)?;
    let mut buffer = ReplayBuffer::new(est.buffer_capacity, est.reinit_prob)?;
    let mut rng = root.split(3);
    let mut scratch = Vec::new();
    let frozen = vec![false; theta.len()];

    let trace = optimize(theta, cfg.steps, &cfg.optimizer, &frozen, cfg.record_wall_time, |th, _| {
        let batch = pick_batch(&data, est.batch_size, &mut rng, &mut scratch);
        match est.kind {
            EstimatorKind::Sm => sm_loss(&family, th, batch),
            EstimatorKind::Ssm => ssm_loss(&family, th, batch, &slices, &mut rng),
            EstimatorKind::Dsm => dsm_loss(&family, th, batch, est.sigma, &mut rng),
            EstimatorKind::DsmCv => dsm_cv_loss(&family, th, batch, est.sigma, &mut rng),
            EstimatorKind::Nce => {
                let noise_batch = noise.sample_n(&mut rng, est.noise_samples);
                nce_loss(&family, th, batch, &noise_batch, &nce_cfg)
            }
            EstimatorKind::Cd => cd_gradient(&family, th, batch, &langevin, CdInit::Data, None, &mut rng),
            EstimatorKind::Pcd => {
                cd_gradient(&family, th, batch, &langevin, CdInit::Buffer, Some(&mut buffer), &mut rng)
            }
        }
    })?;

    let summary = summarize(cfg, &family, &trace, &data)?;
    Ok(TrainOutcome { family, trace, summary })
}

fn summarize(
    cfg: &ExperimentConfig,
    family: &EnergyFamily,
    trace: &Trace,
    data: &[RealVector],
) -> Result<Vec<MetricRow>> {
    let (theta, log_z) = trace.theta.split_log_z();
    let mut rows: Vec<MetricRow> =
        theta.names().into_iter().zip(theta.values()).map(|(n, v)| MetricRow::info(format!("theta.{n}"), *v)).collect();
    if let Some(c) = log_z {
        rows.push(MetricRow::info("log_z", c));
    }
    rows.push(MetricRow::info("final_loss", trace.final_loss));
    if cfg.family.name == FamilyName::Gaussian && cfg.data.dist == DataDist::Normal {
        let (means, vars) = family.gaussian_marginals(&theta)?;
        let dsm = matches!(cfg.estimator.kind, EstimatorKind::Dsm | EstimatorKind::DsmCv);
        for i in 0..means.len() {
            let sfx = if means.len() > 1 { format!("[{i}]") } else { String::new() };
            rows.push(MetricRow::info(format!("mu_hat{sfx}"), means[i]));
            rows.push(MetricRow::info(format!("sigma_hat{sfx}"), vars[i].sqrt()));
            if dsm {
                // The DSM optimum is the noise-convolved data density.
                let target = cfg.data.std.powi(2) + cfg.estimator.sigma.powi(2);
                let e = (vars[i] - target).abs();
                rows.push(MetricRow::check(format!("abs_err_var_noisy{sfx}"), e, "< 0.1", e < 0.1));
            } else {
                let e = (means[i] - cfg.data.mean).abs();
                rows.push(MetricRow::check(format!("abs_err_mu{sfx}"), e, "< 0.05", e < 0.05));
                let e = (vars[i].sqrt() - cfg.data.std).abs();
                rows.push(MetricRow::check(format!("abs_err_sigma{sfx}"), e, "< 0.1", e < 0.1));
            }
        }
    } else {
        let n = data.len().min(2000);
        rows.push(MetricRow::info("ksd_bandwidth_1", ksd(family, &theta, &data[..n], 1.0)?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Experiment;

    #[test]
    fn frozen_parameters_stay_put() {
        let f = EnergyFamily::gaussian(1).unwrap();
        let th = f.gaussian_params(&[0.0], &[1.0]).unwrap();
        let data = GaussianDensity::isotropic(1, 2.0, 1.0).unwrap().sample_n(&mut RngStream::new(1), 100);
        let spec = ExperimentConfig::defaults(Experiment::GaussianRecovery).optimizer;
        let t = optimize(th, 25, &spec, &[false, true], false, |t, _| sm_loss(&f, t, &data)).unwrap();
        assert_eq!(t.theta.values()[1], 0.0);
        assert!(t.theta.values()[0] > 0.0);
        // steps 0, 10, 20 and the final step 24
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[3][0], 24.0);
        assert_eq!(t.header.len(), t.rows[0].len());
    }

    #[test]
    fn two_mode_sampler_weights() {
        let spec = ExperimentConfig::defaults(Experiment::ModeWeight).data;
        let mut rng = RngStream::new(3);
        let n = 20_000;
        let pos = (0..n).filter(|_| sample_two_mode(&spec, &mut rng)[0] > 0.0).count();
        let frac = pos as f64 / n as f64;
        assert!((frac - 0.7).abs() < 3.0 * (0.21f64 / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn short_runs_of_every_estimator() {
        for &kind in EstimatorKind::ALL {
            let mut cfg = ExperimentConfig::defaults(Experiment::GaussianRecovery);
            cfg.estimator.kind = kind;
            cfg.steps = 12;
            cfg.data.samples = 200;
            cfg.estimator.noise_samples = 200;
            cfg.estimator.slices = 4;
            cfg.estimator.langevin_steps = 3;
            let out = train(&cfg).unwrap();
            assert_eq!(out.trace.rows.len(), 3, "{kind}");
            assert!(out.summary.iter().any(|r| r.name == "final_loss"));
        }
    }
}
