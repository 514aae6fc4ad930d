//! Closed-form and Monte Carlo studies of the connections between estimators.

use std::f64::consts::{LN_2, PI};

use super::config::ExperimentConfig;
use super::csvout::MetricRow;
use super::train::{optimize, sample_data};
use super::ExperimentOutput;
use crate::energy::{
    fisher_grad_theta_gaussian1, gaussian_fisher_divergence, gaussian_kl, EnergyFamily, GaussianDensity, ParamVector,
};
use crate::error::{EbmError, Result};
use crate::estimators::{
    cd_gradient_from_samples, dsm_cv_loss, nce_loss, shifted_nce_loss, sliced_objective, NceConfig,
};
use crate::numerics::{rel_error, RealVector, RngStream};

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn model_theta(cfg: &ExperimentConfig, family: &EnergyFamily) -> Result<ParamVector> {
    family.gaussian_params(&[cfg.model.mean], &[1.0 / (cfg.model.std * cfg.model.std)])
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// One-step Langevin CD gradient against `(ε²/2) ∇θ D_F`.
///
/// Every datapoint gets the pair of one-step proposals
/// `x + (ε²/2) s(x) ± ε z`. The antithetic pair cancels the O(ε) noise term,
/// which otherwise swamps the O(ε²) signal at small ε. The same `z` is
/// reused across ε.
pub fn cd_sm_connection(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let family = EnergyFamily::gaussian(1)?;
    let theta = model_theta(cfg, &family)?;
    let density = GaussianDensity::isotropic(1, cfg.data.mean, cfg.data.std)?;
    let root = RngStream::new(cfg.seed);
    let data = density.sample_n(&mut root.split(1), cfg.sweep.samples);
    let mut z = vec![0.0; data.len()];
    root.split(2).fill_normal(&mut z);
    let g_sm = fisher_grad_theta_gaussian1(&family, &theta, &density)?;

    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    let mut cosines = Vec::new();
    let mut moved = Vec::with_capacity(2 * data.len());
    for &eps in &cfg.sweep.values {
        moved.clear();
        for (x, zi) in data.iter().zip(&z) {
            let drift = x[0] + 0.5 * eps * eps * crate::energy::score(&family, &theta, x)?[0];
            moved.push(RealVector::from_raw(vec![drift + eps * zi]));
            moved.push(RealVector::from_raw(vec![drift - eps * zi]));
        }
        let g_cd = cd_gradient_from_samples(&family, &theta, &data, &moved)?.grad_theta;
        let cos = cosine(&g_cd, &g_sm);
        let ratio = g_cd.norm() / (0.5 * eps * eps * g_sm.norm());
        rows.push(vec![eps, cos, ratio, g_cd[0], g_cd[1], g_sm[0], g_sm[1]]);
        ratios.push((eps, ratio));
        cosines.push((eps, cos));
    }

    let mut summary = Vec::new();
    for &(eps, cos) in &cosines {
        summary.push(MetricRow::info(format!("cosine_eps_{eps}"), cos));
    }
    for &(eps, r) in &ratios {
        summary.push(MetricRow::info(format!("ratio_eps_{eps}"), r));
    }
    if let Some(&(eps, cos)) = cosines.iter().find(|(e, _)| *e == 0.01) {
        summary.push(MetricRow::check(format!("cosine_at_eps_{eps}"), cos, "> 0.99", cos > 0.99));
    }
    // Trend: |ratio − 1| must not grow as ε shrinks (sweep listed largest first).
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let violations = sorted.windows(2).filter(|w| (w[1].1 - 1.0).abs() > (w[0].1 - 1.0).abs() + RATIO_SLACK).count();
    summary.push(MetricRow::check(
        "ratio_trend_violations",
        violations as f64,
        format!("== 0 (slack {RATIO_SLACK})"),
        violations == 0,
    ));
    Ok(ExperimentOutput {
        header: header(&["epsilon", "cosine", "ratio", "g_cd_mu", "g_cd_log_chol", "g_sm_mu", "g_sm_log_chol"]),
        rows,
        summary,
    })
}

/// Monte Carlo allowance when checking that `|ratio − 1|` shrinks with ε.
pub const RATIO_SLACK: f64 = 0.01;

/// Numerical d/dt of `KL(q_t ‖ p_t)` under Gaussian smoothing with variance t,
/// against the Fisher divergence of the smoothed pair.
///
/// With `D_F` carrying its ½, the exact identity is `d/dt KL = −D_F`. The
/// `rhs_half` column records `−½ D_F` for comparison.
pub fn de_bruijn(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let q = GaussianDensity::isotropic(1, cfg.data.mean, cfg.data.std)?;
    let p = GaussianDensity::isotropic(1, cfg.model.mean, cfg.model.std)?;
    let h = cfg.sweep.fd_step;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &t in &cfg.sweep.values {
        let row = de_bruijn_point(&q, &p, t, h)?;
        summary.push(MetricRow::check(format!("rel_gap_t_{t}"), row[3], "< 0.001", row[3] < 1e-3));
        summary.push(MetricRow::info(format!("rel_gap_half_t_{t}"), row[5]));
        rows.push(row);
    }
    Ok(ExperimentOutput { header: header(&["t", "lhs", "rhs", "rel_gap", "rhs_half", "rel_gap_half"]), rows, summary })
}

/// `[t, lhs, rhs, rel_gap, rhs_half, rel_gap_half]` at one smoothing time.
pub fn de_bruijn_point(q: &GaussianDensity, p: &GaussianDensity, t: f64, h: f64) -> Result<Vec<f64>> {
    if !(t > 0.0) || !(h > 0.0) || h >= t {
        return Err(EbmError::invalid(format!("need 0 < h < t, got t = {t}, h = {h}")));
    }
    let kl = |s: f64| gaussian_kl(&q.smoothed(s)?, &p.smoothed(s)?);
    let lhs = (kl(t + h)? - kl(t - h)?) / (2.0 * h);
    let fisher = gaussian_fisher_divergence(&q.smoothed(t)?, &p.smoothed(t)?)?;
    let (rhs, rhs_half) = (-fisher, -0.5 * fisher);
    Ok(vec![t, lhs, rhs, rel_error(&[lhs], &[rhs]), rhs_half, rel_error(&[lhs], &[rhs_half])])
}

/// Coefficient on the sliced objective in the second-order expansion
/// `shifted NCE ≈ 2 log 2 + ½ [½(vᵀ∇E)² − vᵀ∇²E v]`.
pub const TAYLOR_COEF: f64 = 0.5;

/// Gap between shifted NCE and its quadratic Taylor expansion, per ‖v‖.
/// `gap_quarter` uses coefficient ¼ instead of ½ for comparison.
pub fn ssm_nce_equiv(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let family = EnergyFamily::gaussian(1)?;
    let theta = model_theta(cfg, &family)?;
    let batch = sample_data(&cfg.data, &mut RngStream::new(cfg.seed).split(1))?;
    let rows = taylor_rows(&family, &theta, &batch, &cfg.sweep.values)?;
    let mut summary = Vec::new();
    for r in &rows {
        summary.push(MetricRow::info(format!("gap_over_norm2_{}", r[0]), r[4]));
    }
    let ratios: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    let decreasing = strictly_decreasing_in_norm(&rows);
    summary.push(MetricRow::check(
        "gap_over_norm2_strictly_decreasing",
        f64::from(u8::from(decreasing)),
        "== 1",
        decreasing,
    ));
    summary.push(MetricRow::info("gap_over_norm2_smallest", ratios.iter().copied().fold(f64::INFINITY, f64::min)));
    Ok(ExperimentOutput {
        header: header(&[
            "norm",
            "shifted_nce",
            "sliced",
            "gap",
            "gap_over_norm2",
            "gap_quarter",
            "gap_quarter_over_norm2",
        ]),
        rows,
        summary,
    })
}

/// `[‖v‖, loss, sliced, gap, gap/‖v‖², gap¼, gap¼/‖v‖²]` for `v = ‖v‖ e₁`.
pub fn taylor_rows(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    norms: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for &n in norms {
        let mut v = vec![0.0; family.dim()];
        v[0] = n;
        let loss = shifted_nce_loss(family, theta, batch, &v)?.loss;
        let sliced = sliced_objective(family, theta, batch, &v)?;
        let gap = (loss - 2.0 * LN_2 - TAYLOR_COEF * sliced).abs();
        let gap_q = (loss - 2.0 * LN_2 - 0.25 * sliced).abs();
        rows.push(vec![n, loss, sliced, gap, gap / (n * n), gap_q, gap_q / (n * n)]);
    }
    Ok(rows)
}

fn strictly_decreasing_in_norm(rows: &[Vec<f64>]) -> bool {
    let mut by_norm: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[4])).collect();
    by_norm.sort_by(|a, b| b.0.total_cmp(&a.0));
    by_norm.windows(2).all(|w| w[1].1 < w[0].1)
}

/// Per-sample DSM variance with and without the control variate, averaged
/// over `sweep.resamples` fresh batches of `data.samples` points at each σ.
pub fn control_variate(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let family = EnergyFamily::gaussian(1)?;
    let theta = model_theta(cfg, &family)?;
    let density = GaussianDensity::isotropic(1, cfg.data.mean, cfg.data.std)?;
    let root = RngStream::new(cfg.seed);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (k, &sigma) in cfg.sweep.values.iter().enumerate() {
        let mut rng = root.split(k as u64 + 1);
        let (mut plain, mut with_cv, mut c_mean, mut c_var) = (0.0, 0.0, 0.0, 0.0);
        let r = cfg.sweep.resamples as f64;
        for _ in 0..cfg.sweep.resamples {
            let batch = density.sample_n(&mut rng, cfg.data.samples);
            let rep = dsm_cv_loss(&family, &theta, &batch, sigma, &mut rng)?;
            plain += rep.aux("var_plain").unwrap_or(f64::NAN) / r;
            with_cv += rep.aux("var_cv").unwrap_or(f64::NAN) / r;
            c_mean += rep.aux("cv_mean").unwrap_or(f64::NAN) / r;
            c_var += rep.aux("cv_se").unwrap_or(f64::NAN).powi(2);
        }
        let c_se = c_var.sqrt() / r;
        let ratio = with_cv / plain;
        rows.push(vec![sigma, plain, with_cv, ratio, c_mean, c_se]);
        if sigma <= 0.01 {
            summary.push(MetricRow::check(format!("variance_ratio_sigma_{sigma}"), ratio, "<= 0.1", ratio <= 0.1));
        } else {
            summary.push(MetricRow::info(format!("variance_ratio_sigma_{sigma}"), ratio));
        }
        let z = (c_mean / c_se).abs();
        summary.push(MetricRow::check(format!("cv_mean_z_sigma_{sigma}"), z, "< 3", z < 3.0));
    }
    Ok(ExperimentOutput {
        header: header(&["sigma", "var_plain", "var_cv", "ratio", "cv_mean", "cv_se"]),
        rows,
        summary,
    })
}

/// `log ∫ exp(−E(x)) dx` for a 1-D energy by composite Simpson on
/// `[lo, hi]` with `n` (even) intervals.
pub fn log_partition_1d(family: &EnergyFamily, theta: &ParamVector, lo: f64, hi: f64, n: usize) -> Result<f64> {
    if family.dim() != 1 || n < 2 || n % 2 == 1 || !(hi > lo) {
        return Err(EbmError::invalid("quadrature needs a 1-D family, hi > lo and an even interval count"));
    }
    let h = (hi - lo) / n as f64;
    let energies: Vec<f64> =
        (0..=n).map(|i| crate::energy::energy(family, theta, &[lo + i as f64 * h])).collect::<Result<_>>()?;
    let shift = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut acc = 0.0;
    for (i, e) in energies.iter().enumerate() {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (shift - e).exp();
    }
    Ok((acc * h / 3.0).ln() - shift)
}

/// Phase 1 learns only c for the fixed energy `x²/2`. Phase 2 trains a
/// quadratic energy with c pinned at 0 and measures its log-partition by
/// quadrature.
pub fn nce_partition(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let root = RngStream::new(cfg.seed);
    let data = sample_data(&cfg.data, &mut root.split(1))?;
    let est = &cfg.estimator;
    let noise_density = GaussianDensity::isotropic(1, est.noise_mean, est.noise_std)?;
    let noise = noise_density.sample_n(&mut root.split(2), est.noise_samples);

    let gauss = EnergyFamily::gaussian(1)?;
    let start = gauss.gaussian_params(&[0.0], &[1.0])?.with_log_z(0.0)?;
    let learn = NceConfig { nu: est.nu, noise: noise_density.clone(), learn_log_z: true };
    let phase1 = optimize(start, cfg.steps, &cfg.optimizer, &[true, true, false], cfg.record_wall_time, |th, _| {
        nce_loss(&gauss, th, &data, &noise, &learn)
    })?;
    let c_hat = phase1.theta.split_log_z().1.unwrap_or(f64::NAN);

    let poly = EnergyFamily::poly1d(2)?;
    let start = poly.params(vec![0.0; poly.param_count()])?;
    let fixed = NceConfig { learn_log_z: false, ..learn };
    let phase2 = optimize(start, cfg.steps, &cfg.optimizer, &[false; 3], cfg.record_wall_time, |th, _| {
        nce_loss(&poly, th, &data, &noise, &fixed)
    })?;
    let log_z = log_partition_1d(&poly, &phase2.theta, -30.0, 30.0, 60_000)?;

    let target = 0.5 * (2.0 * PI).ln();
    let err_c = (c_hat - target).abs();
    let summary = vec![
        MetricRow::info("c_hat", c_hat),
        MetricRow::info("c_target", target),
        MetricRow::check("abs_err_c", err_c, "< 0.02", err_c < 0.02),
        MetricRow::info("poly.a0", phase2.theta.values()[0]),
        MetricRow::info("poly.a1", phase2.theta.values()[1]),
        MetricRow::info("poly.log_a2", phase2.theta.values()[2]),
        MetricRow::check("self_normalized_abs_log_z", log_z.abs(), "< 0.05", log_z.abs() < 0.05),
    ];
    // One table: phase 1 rows, then phase 2 rows, tagged by a phase column.
    let mut rows = Vec::new();
    let idx1 = |name: &str| phase1.header.iter().position(|h| h == name);
    let idx2 = |name: &str| phase2.header.iter().position(|h| h == name);
    let (l1, c1, g1) = (idx1("loss"), idx1("log_z"), idx1("grad_norm"));
    let (l2, g2) = (idx2("loss"), idx2("grad_norm"));
    let pick = |row: &Vec<f64>, i: Option<usize>| i.map_or(f64::NAN, |i| row[i]);
    for r in &phase1.rows {
        rows.push(vec![
            1.0,
            r[0],
            pick(r, l1),
            pick(r, c1),
            f64::NAN,
            f64::NAN,
            f64::NAN,
            pick(r, g1),
            *r.last().unwrap_or(&0.0),
        ]);
    }
    for r in &phase2.rows {
        rows.push(vec![2.0, r[0], pick(r, l2), f64::NAN, r[2], r[3], r[4], pick(r, g2), *r.last().unwrap_or(&0.0)]);
    }
    Ok(ExperimentOutput {
        header: header(&["phase", "step", "loss", "log_z", "coef[0]", "coef[1]", "log_lead", "grad_norm", "wall_ms"]),
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Experiment;

    #[test]
    fn de_bruijn_identical_pair_is_zero() {
        let q = GaussianDensity::isotropic(1, 0.3, 1.2).unwrap();
        let row = de_bruijn_point(&q, &q, 0.5, 1e-4).unwrap();
        assert_eq!(row[1], 0.0);
        assert_eq!(row[2], 0.0);
        assert_eq!(row[3], 0.0);
    }

    #[test]
    fn de_bruijn_gap_is_second_order_in_h() {
        let q = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap();
        let p = GaussianDensity::isotropic(1, 0.8, 1.5).unwrap();
        let a = de_bruijn_point(&q, &p, 0.5, 0.05).unwrap();
        let b = de_bruijn_point(&q, &p, 0.5, 0.005).unwrap();
        let shrink = (a[1] - a[2]).abs() / (b[1] - b[2]).abs();
        assert!((50.0..200.0).contains(&shrink), "{shrink}");
        assert!(de_bruijn_point(&q, &p, 0.0, 1e-4).is_err());
    }

    #[test]
    fn taylor_gap_vanishes_for_flat_energy() {
        let f = EnergyFamily::poly1d(2).unwrap();
        let th = f.poly_params(&[1.0, 0.0, 1e-300]).unwrap();
        let batch = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap().sample_n(&mut RngStream::new(1), 100);
        for r in taylor_rows(&f, &th, &batch, &[0.1, 0.05]).unwrap() {
            assert!(r[3].abs() < 1e-200, "{}", r[3]);
        }
        assert!(taylor_rows(&f, &th, &batch, &[0.0]).is_err());
    }

    #[test]
    fn quadrature_matches_gaussian_normalizer() {
        let f = EnergyFamily::gaussian(1).unwrap();
        let th = f.gaussian_params(&[0.4], &[0.25]).unwrap();
        let lz = log_partition_1d(&f, &th, -40.0, 40.0, 20_000).unwrap();
        // ∫ exp(−P(x−μ)²/2) = √(2π/P)
        assert!((lz - 0.5 * (2.0 * PI / 0.25).ln()).abs() < 1e-10);
    }

    #[test]
    fn small_cd_sm_run_has_expected_shape() {
        let mut cfg = ExperimentConfig::defaults(Experiment::CdSmConnection);
        cfg.sweep.samples = 2000;
        let out = cd_sm_connection(&cfg).unwrap();
        assert_eq!(out.rows.len(), 4);
        assert_eq!(out.header.len(), out.rows[0].len());
        // Large ε already points roughly along the Fisher gradient.
        assert!(out.rows[0][1] > 0.9);
    }
}
