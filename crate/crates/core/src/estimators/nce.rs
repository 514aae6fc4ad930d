use super::{axpy, check_batch, LossReport, Moments};
use crate::energy::{EnergyFamily, GaussianDensity, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::RealVector;

/// Noise-contrastive estimation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct NceConfig {
    /// Ratio ν = p(y=1)/p(y=0); `None` uses N/M from the batch sizes.
    pub nu: Option<f64>,
    pub noise: GaussianDensity,
    /// When true θ must carry a trailing `log_z` block holding c.
    /// Otherwise c = 0 and the model is trained to self-normalize.
    pub learn_log_z: bool,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy between data (y = 1) and noise (y = 0) under the
/// classifier logit `log ν − E_θ(x) − c − log p_n(x)`, averaged over all
/// N + M points.
///
/// `aux` reports the mean posterior of y = 1 on data (`posterior_data`) and
/// noise (`posterior_noise`), and the ν used.
pub fn nce_loss(
    family: &EnergyFamily,
    theta_with_logz: &ParamVector,
    data_batch: &[RealVector],
    noise_batch: &[RealVector],
    cfg: &NceConfig,
) -> Result<LossReport> {
    let (theta, log_z) = theta_with_logz.split_log_z();
    let c = match (cfg.learn_log_z, log_z) {
        (true, Some(c)) => c,
        (false, None) => 0.0,
        (true, None) => return Err(EbmError::invalid("learn_log_z is set but θ carries no log_z block")),
        (false, Some(_)) => return Err(EbmError::invalid("θ carries log_z but learn_log_z is off")),
    };
    family.check_theta(&theta)?;
    check_batch(family, data_batch)?;
    check_batch(family, noise_batch)?;
    if cfg.noise.dim() != family.dim() {
        return Err(EbmError::invalid("noise density dimension differs from the family"));
    }
    let nu = cfg.nu.unwrap_or(data_batch.len() as f64 / noise_batch.len() as f64);
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(EbmError::invalid(format!("nu must be positive, got {nu}")));
    }
    let ln_nu = nu.ln();
    let th = theta.values();
    let p = family.param_count();
    let mut grad = vec![0.0; p + usize::from(cfg.learn_log_z)];
    let mut gt = vec![0.0; p];
    let total = (data_batch.len() + noise_batch.len()) as f64;
    let mut loss = 0.0;
    let mut post = [Moments::default(), Moments::default()];
    for (label, batch) in [(1usize, data_batch), (0usize, noise_batch)] {
        for (i, x) in batch.iter().enumerate() {
            let ln_pn = cfg.noise.log_density(x);
            if !ln_pn.is_finite() {
                return Err(EbmError::NonFinite {
                    context: format!("noise log-density at {} point {i}", if label == 1 { "data" } else { "noise" }),
                    index: i,
                });
            }
            let logit = ln_nu - family.energy_raw(th, x) - c - ln_pn;
            // d(loss)/d(logit): −σ(−l) for data, σ(l) for noise
            let (term, dl) =
                if label == 1 { (softplus(-logit), -sigmoid(-logit)) } else { (softplus(logit), sigmoid(logit)) };
            loss += term;
            post[1 - label].push(sigmoid(logit));
            // d(logit)/dθ = −∇θE, d(logit)/dc = −1
            family.grad_theta_raw(th, x, &mut gt);
            axpy(&mut grad[..p], -dl, &gt);
            if cfg.learn_log_z {
                grad[p] -= dl;
            }
        }
    }
    for g in &mut grad {
        *g /= total;
    }
    Ok(LossReport::new(loss / total, grad)?
        .with("posterior_data", post[0].mean())
        .with("posterior_noise", post[1].mean())
        .with("nu", nu))
}

/// NCE against the data shifted by ±v:
/// mean of `log(1 + e^{E(x) − E(x−v)}) + log(1 + e^{E(x) − E(x+v)})`.
pub fn shifted_nce_loss(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    v: &[f64],
) -> Result<LossReport> {
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    family.check_x(v)?;
    if v.iter().all(|a| *a == 0.0) {
        return Err(EbmError::invalid("shift v must be nonzero; v = 0 gives the constant 2 log 2"));
    }
    // Only energy differences enter, so the additive-offset parameter (if
    // any) is zeroed to make the loss bit-for-bit invariant to it.
    let mut th = theta.values().to_vec();
    if let Some(i) = family.offset_param() {
        th[i] = 0.0;
    }
    let th = th.as_slice();
    let d = family.dim();
    let p = family.param_count();
    let mut grad = vec![0.0; p];
    let (mut g0, mut gs) = (vec![0.0; p], vec![0.0; p]);
    let mut xs = vec![0.0; d];
    let mut mom = Moments::default();
    for x in batch {
        let e0 = family.energy_raw(th, x);
        family.grad_theta_raw(th, x, &mut g0);
        let mut term = 0.0;
        for sign in [-1.0, 1.0] {
            for i in 0..d {
                xs[i] = x[i] + sign * v[i];
            }
            let a = e0 - family.energy_raw(th, &xs);
            term += softplus(a);
            family.grad_theta_raw(th, &xs, &mut gs);
            let w = sigmoid(a);
            axpy(&mut grad, w, &g0);
            axpy(&mut grad, -w, &gs);
        }
        mom.push(term);
    }
    for g in &mut grad {
        *g /= batch.len() as f64;
    }
    Ok(LossReport::new(mom.mean(), grad)?.with("loss_se", mom.std_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::estimator_grad_theta;
    use crate::numerics::{rel_error, RngStream};
    use std::f64::consts::LN_2;

    fn std_gauss() -> (EnergyFamily, ParamVector) {
        let f = EnergyFamily::gaussian(1).unwrap();
        let t = f.gaussian_params(&[0.0], &[1.0]).unwrap();
        (f, t)
    }

    #[test]
    fn matched_model_and_noise_give_log2() {
        // E = x²/2 and c = ½ ln 2π make p_θ = N(0,1) = p_n exactly.
        let (f, th) = std_gauss();
        let th = th.with_log_z(0.5 * (2.0 * std::f64::consts::PI).ln()).unwrap();
        let noise = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap();
        let mut rng = RngStream::new(1);
        let data = noise.sample_n(&mut rng, 50);
        let nz = noise.sample_n(&mut rng, 50);
        let cfg = NceConfig { nu: None, noise, learn_log_z: true };
        let r = nce_loss(&f, &th, &data, &nz, &cfg).unwrap();
        assert!((r.loss - LN_2).abs() < 1e-12);
        assert!((r.aux("posterior_data").unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shift_moves_only_through_c() {
        let f = EnergyFamily::poly1d(2).unwrap();
        let th = f.poly_params(&[0.1, 0.2, 0.6]).unwrap();
        let mut shifted = th.values().to_vec();
        shifted[0] += 0.7;
        let a = th.with_log_z(0.3).unwrap();
        let b = f.params(shifted).unwrap().with_log_z(0.3 - 0.7).unwrap();
        let noise = GaussianDensity::isotropic(1, 0.0, 1.5).unwrap();
        let mut rng = RngStream::new(2);
        let data = noise.sample_n(&mut rng, 40);
        let nz = noise.sample_n(&mut rng, 60);
        let cfg = NceConfig { nu: None, noise, learn_log_z: true };
        let la = nce_loss(&f, &a, &data, &nz, &cfg).unwrap().loss;
        let lb = nce_loss(&f, &b, &data, &nz, &cfg).unwrap().loss;
        assert!((la - lb).abs() < 1e-12);
    }

    #[test]
    fn nce_grad_matches_fd() {
        let f = EnergyFamily::gaussian(2).unwrap();
        let mut rng = RngStream::new(3);
        let th = f.random_params(&mut rng).with_log_z(1.2).unwrap();
        let noise = GaussianDensity::isotropic(2, 0.0, 2.0).unwrap();
        let data = GaussianDensity::isotropic(2, 0.5, 1.0).unwrap().sample_n(&mut rng, 30);
        let nz = noise.sample_n(&mut rng, 45);
        let cfg = NceConfig { nu: None, noise, learn_log_z: true };
        let r = nce_loss(&f, &th, &data, &nz, &cfg).unwrap();
        let fd = crate::numerics::finite_diff_gradient(
            |t| Ok(nce_loss(&f, &th.with_values(t.to_vec())?, &data, &nz, &cfg)?.loss),
            th.values(),
            1e-5,
        )
        .unwrap();
        assert!(rel_error(&r.grad_theta, &fd) < 1e-6);
    }

    #[test]
    fn log_z_block_must_match_flag() {
        let (f, th) = std_gauss();
        let noise = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap();
        let pts = vec![RealVector::zeros(1)];
        let cfg = NceConfig { nu: None, noise, learn_log_z: true };
        assert!(nce_loss(&f, &th, &pts, &pts, &cfg).is_err());
        let cfg = NceConfig { learn_log_z: false, ..cfg };
        assert!(nce_loss(&f, &th.with_log_z(0.0).unwrap(), &pts, &pts, &cfg).is_err());
        let cfg = NceConfig { nu: Some(0.0), ..cfg };
        assert!(nce_loss(&f, &th, &pts, &pts, &cfg).is_err());
    }

    #[test]
    fn shifted_constant_energy_is_two_log2() {
        let f = EnergyFamily::poly1d(2).unwrap();
        // a₂ → tiny: energy is effectively constant in x.
        let th = f.poly_params(&[3.0, 0.0, 1e-300]).unwrap();
        let batch = vec![RealVector::new(vec![0.3]).unwrap(), RealVector::new(vec![-0.2]).unwrap()];
        let r = shifted_nce_loss(&f, &th, &batch, &[0.5]).unwrap();
        assert!((r.loss - 2.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn shifted_rejects_zero_shift_and_is_shift_invariant() {
        let f = EnergyFamily::poly1d(4).unwrap();
        let th = f.poly_params(&[0.0, 0.3, -0.2, 0.1, 0.4]).unwrap();
        let batch = GaussianDensity::isotropic(1, 0.0, 1.0).unwrap().sample_n(&mut RngStream::new(4), 30);
        assert!(shifted_nce_loss(&f, &th, &batch, &[0.0]).is_err());
        let mut sh = th.values().to_vec();
        sh[0] += 5.0;
        let sh = f.params(sh).unwrap();
        assert_eq!(
            shifted_nce_loss(&f, &th, &batch, &[0.1]).unwrap().loss,
            shifted_nce_loss(&f, &sh, &batch, &[0.1]).unwrap().loss
        );
    }

    #[test]
    fn shifted_grad_matches_fd() {
        let mut rng = RngStream::new(6);
        for f in [EnergyFamily::gaussian(2).unwrap(), EnergyFamily::mixture_rbf(2, 2).unwrap()] {
            let th = f.random_params(&mut rng);
            let batch = GaussianDensity::isotropic(2, 0.0, 1.0).unwrap().sample_n(&mut rng, 20);
            let v = [0.3, -0.2];
            let r = shifted_nce_loss(&f, &th, &batch, &v).unwrap();
            let fd = estimator_grad_theta(&f, &th, |t, _| Ok(shifted_nce_loss(&f, t, &batch, &v)?.loss), &rng).unwrap();
            assert!(rel_error(&r.grad_theta, &fd) < 1e-6, "{f}");
        }
    }
}
