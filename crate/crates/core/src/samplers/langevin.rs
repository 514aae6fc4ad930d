use crate::energy::{EnergyFamily, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::{RealVector, RngStream};

/// Step size ε, number of steps K, and whether to Metropolis-adjust.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinConfig {
    pub step_size: f64,
    pub num_steps: usize,
    pub adjust: bool,
}

impl LangevinConfig {
    pub fn new(step_size: f64, num_steps: usize, adjust: bool) -> Result<Self> {
        let cfg = Self { step_size, num_steps, adjust };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(EbmError::invalid("Langevin step size must be positive"));
        }
        if self.num_steps == 0 {
            return Err(EbmError::invalid("Langevin needs at least one step"));
        }
        Ok(())
    }
}

/// Something a Langevin chain can target.
pub trait LangevinTarget {
    fn dim(&self) -> usize;

    /// Writes `∇ₓ log p(x)` into `out`.
    fn score_into(&self, x: &[f64], out: &mut [f64]);

    /// Unnormalized energy; only MALA needs it.
    fn energy(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// An energy family at fixed θ.
#[derive(Debug, Clone, Copy)]
pub struct ModelTarget<'a> {
    pub family: &'a EnergyFamily,
    pub theta: &'a [f64],
}

impl<'a> ModelTarget<'a> {
    pub fn new(family: &'a EnergyFamily, theta: &'a ParamVector) -> Result<Self> {
        family.check_theta(theta)?;
        Ok(Self { family, theta: theta.values() })
    }
}

impl LangevinTarget for ModelTarget<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        self.family.grad_x_raw(self.theta, x, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
    }

    fn energy(&self, x: &[f64]) -> Option<f64> {
        Some(self.family.energy_raw(self.theta, x))
    }
}

/// Closure-backed target: a score function and an optional energy.
pub struct FnTarget<S, E = fn(&[f64]) -> f64> {
    dim: usize,
    score: S,
    energy: Option<E>,
}

impl<S: Fn(&[f64], &mut [f64])> FnTarget<S> {
    pub fn score_only(dim: usize, score: S) -> Self {
        Self { dim, score, energy: None }
    }
}

impl<S: Fn(&[f64], &mut [f64]), E: Fn(&[f64]) -> f64> FnTarget<S, E> {
    pub fn with_energy(dim: usize, score: S, energy: E) -> Self {
        Self { dim, score, energy: Some(energy) }
    }
}

impl<S: Fn(&[f64], &mut [f64]), E: Fn(&[f64]) -> f64> LangevinTarget for FnTarget<S, E> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn score_into(&self, x: &[f64], out: &mut [f64]) {
        (self.score)(x, out)
    }

    fn energy(&self, x: &[f64]) -> Option<f64> {
        self.energy.as_ref().map(|e| e(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub final_state: RealVector,
    /// States after each step, when requested.
    pub trajectory: Option<Vec<RealVector>>,
    /// Accepted proposals (equals the step count when unadjusted).
    pub accepted: usize,
    pub steps: usize,
}

impl ChainOutput {
    pub fn accept_rate(&self) -> f64 {
        self.accepted as f64 / self.steps as f64
    }
}

/// `-‖a − b − (ε²/2) s_b‖² / (2ε²)`, the proposal log-density up to a constant.
fn log_proposal(a: &[f64], b: &[f64], score_b: &[f64], eps: f64) -> f64 {
    let half = 0.5 * eps * eps;
    let mut sq = 0.0;
    for i in 0..a.len() {
        let r = a[i] - b[i] - half * score_b[i];
        sq += r * r;
    }
    -sq / (2.0 * eps * eps)
}

/// Metropolis-Hastings log acceptance ratio for a Langevin proposal `x → x'`:
/// `[−E(x') + log q(x|x')] − [−E(x) + log q(x'|x)]`.
pub fn mala_log_accept_ratio(target: &dyn LangevinTarget, x: &[f64], x_prop: &[f64], step_size: f64) -> Result<f64> {
    let d = target.dim();
    if x.len() != d || x_prop.len() != d {
        return Err(EbmError::invalid("MALA points must match the target dimension"));
    }
    let mut sx = vec![0.0; d];
    let mut sp = vec![0.0; d];
    target.score_into(x, &mut sx);
    target.score_into(x_prop, &mut sp);
    log_accept(target, x, x_prop, &sx, &sp, step_size)
}

fn log_accept(target: &dyn LangevinTarget, x: &[f64], x_prop: &[f64], sx: &[f64], sp: &[f64], eps: f64) -> Result<f64> {
    let (ex, ep) = match (target.energy(x), target.energy(x_prop)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(EbmError::invalid("MALA needs a target with an energy")),
    };
    if !ex.is_finite() || !ep.is_finite() {
        return Err(EbmError::NonFinite { context: "MALA energy".into(), index: 0 });
    }
    Ok((ex - ep) + log_proposal(x, x_prop, sp, eps) - log_proposal(x_prop, x, sx, eps))
}

/// Runs `K` Langevin updates `x ← x + (ε²/2) ∇log p(x) + ε z`, optionally with
/// a Metropolis-Hastings correction.
///
/// Draws per step: one normal vector of `dim` entries, plus one uniform when
/// adjusted.
pub fn langevin_chain(
    target: &dyn LangevinTarget,
    x0: &[f64],
    cfg: &LangevinConfig,
    rng: &mut RngStream,
    record_trajectory: bool,
) -> Result<ChainOutput> {
    cfg.validate()?;
    let d = target.dim();
    if x0.len() != d {
        return Err(EbmError::invalid("chain start does not match the target dimension"));
    }
    let eps = cfg.step_size;
    let half = 0.5 * eps * eps;
    let mut x = x0.to_vec();
    let mut s = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut prop = vec![0.0; d];
    let mut s_prop = vec![0.0; d];
    let mut trajectory = record_trajectory.then(|| Vec::with_capacity(cfg.num_steps));
    let mut accepted = 0;

    target.score_into(&x, &mut s);
    for step in 0..cfg.num_steps {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(EbmError::ChainDivergence { step });
        }
        rng.fill_normal(&mut z);
        for i in 0..d {
            prop[i] = x[i] + half * s[i] + eps * z[i];
        }
        target.score_into(&prop, &mut s_prop);
        if cfg.adjust {
            let log_alpha = if s_prop.iter().all(|v| v.is_finite()) {
                log_accept(target, &x, &prop, &s, &s_prop, eps)?
            } else {
                f64::NEG_INFINITY
            };
            let u = rng.uniform();
            if u.ln() < log_alpha {
                std::mem::swap(&mut x, &mut prop);
                std::mem::swap(&mut s, &mut s_prop);
                accepted += 1;
            }
        } else {
            std::mem::swap(&mut x, &mut prop);
            std::mem::swap(&mut s, &mut s_prop);
            accepted += 1;
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(EbmError::ChainDivergence { step });
        }
        if let Some(t) = trajectory.as_mut() {
            t.push(RealVector::from_raw(x.clone()));
        }
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(EbmError::ChainDivergence { step: cfg.num_steps });
    }
    Ok(ChainOutput { final_state: RealVector::from_raw(x), trajectory, accepted, steps: cfg.num_steps })
}

/// Independent chains from the given starts; chain `i` uses `rng.split(i)`.
/// Returns the final states and the overall acceptance rate.
pub fn run_chains(
    target: &dyn LangevinTarget,
    starts: &[RealVector],
    cfg: &LangevinConfig,
    rng: &RngStream,
) -> Result<(Vec<RealVector>, f64)> {
    let mut finals = Vec::with_capacity(starts.len());
    let mut accepted = 0usize;
    for (i, x0) in starts.iter().enumerate() {
        let out = langevin_chain(target, x0, cfg, &mut rng.split(i as u64), false)?;
        accepted += out.accepted;
        finals.push(out.final_state);
    }
    let rate = accepted as f64 / (starts.len().max(1) * cfg.num_steps) as f64;
    Ok((finals, rate))
}

/// Strictly decreasing positive noise levels σ₁ > … > σ_L.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(EbmError::invalid("noise schedule is empty"));
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(EbmError::invalid("noise levels must be positive"));
        }
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(EbmError::invalid("noise levels must be strictly decreasing"));
        }
        Ok(Self { sigmas })
    }

    /// `levels` values spaced geometrically from `max` down to `min`.
    pub fn geometric(max: f64, min: f64, levels: usize) -> Result<Self> {
        if levels == 1 {
            return Self::new(vec![max]);
        }
        let ratio = (min / max).powf(1.0 / (levels - 1) as f64);
        let mut sigmas: Vec<f64> = (0..levels).map(|l| max * ratio.powi(l as i32)).collect();
        if let Some(last) = sigmas.last_mut() {
            *last = min;
        }
        Self::new(sigmas)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn smallest(&self) -> f64 {
        *self.sigmas.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealedOutput {
    pub final_state: RealVector,
    /// σ of each level in the order it was visited.
    pub levels: Vec<f64>,
}

/// Langevin at each noise level from largest to smallest, chaining final
/// states, with level step size `ε · σ_l / σ_L`.
pub fn annealed_langevin<F>(
    dim: usize,
    score_at_sigma: F,
    schedule: &NoiseSchedule,
    per_level: &LangevinConfig,
    x0: &[f64],
    rng: &mut RngStream,
) -> Result<AnnealedOutput>
where
    F: Fn(&[f64], f64, &mut [f64]),
{
    let smallest = schedule.smallest();
    let mut x = x0.to_vec();
    let mut levels = Vec::with_capacity(schedule.sigmas().len());
    for &sigma in schedule.sigmas() {
        let cfg = LangevinConfig { step_size: per_level.step_size * sigma / smallest, ..*per_level };
        let target = FnTarget::score_only(dim, |y: &[f64], out: &mut [f64]| score_at_sigma(y, sigma, out));
        x = langevin_chain(&target, &x, &cfg, rng, false)?.final_state.into_vec();
        levels.push(sigma);
    }
    Ok(AnnealedOutput { final_state: RealVector::from_raw(x), levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::type_complexity)]
    fn std_normal() -> FnTarget<impl Fn(&[f64], &mut [f64]), impl Fn(&[f64]) -> f64> {
        FnTarget::with_energy(1, |x: &[f64], o: &mut [f64]| o[0] = -x[0], |x: &[f64]| 0.5 * x[0] * x[0])
    }

    #[test]
    fn zero_score_single_step_is_pure_noise() {
        let t = FnTarget::score_only(2, |_: &[f64], o: &mut [f64]| o.fill(0.0));
        let cfg = LangevinConfig::new(0.3, 1, false).unwrap();
        let mut rng = RngStream::new(4);
        let out = langevin_chain(&t, &[1.0, -1.0], &cfg, &mut rng.clone(), false).unwrap();
        let mut z = [0.0; 2];
        rng.fill_normal(&mut z);
        assert_eq!(out.final_state.as_slice(), &[1.0 + 0.3 * z[0], -1.0 + 0.3 * z[1]]);
    }

    #[test]
    fn config_validation() {
        assert!(LangevinConfig::new(0.0, 1, false).is_err());
        assert!(LangevinConfig::new(0.1, 0, false).is_err());
    }

    #[test]
    fn divergence_reports_step() {
        let t =
            FnTarget::score_only(1, |x: &[f64], o: &mut [f64]| o[0] = if x[0].abs() > 1.0 { f64::NAN } else { 1e3 });
        let cfg = LangevinConfig::new(1.0, 10, false).unwrap();
        let err = langevin_chain(&t, &[0.0], &cfg, &mut RngStream::new(1), false).unwrap_err();
        assert!(matches!(err, EbmError::ChainDivergence { step: 1 }), "{err:?}");
    }

    #[test]
    fn mala_ratio_properties() {
        let t = std_normal();
        assert_eq!(mala_log_accept_ratio(&t, &[0.4], &[0.4], 0.3).unwrap(), 0.0);

        let shifted =
            FnTarget::with_energy(1, |x: &[f64], o: &mut [f64]| o[0] = -x[0], |x: &[f64]| 0.5 * x[0] * x[0] + 7.0);
        let a = mala_log_accept_ratio(&t, &[0.4], &[1.1], 0.3).unwrap();
        let b = mala_log_accept_ratio(&shifted, &[0.4], &[1.1], 0.3).unwrap();
        assert!((a - b).abs() < 1e-14);

        // Brute force: full Gaussian proposal densities with normalizers.
        let (x, y, eps) = (0.4f64, 1.1f64, 0.3f64);
        let ln_n = |a: f64, m: f64, v: f64| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (a - m).powi(2) / v);
        let fwd = ln_n(y, x - 0.5 * eps * eps * x, eps * eps);
        let bwd = ln_n(x, y - 0.5 * eps * eps * y, eps * eps);
        let brute = (-0.5 * y * y + bwd) - (-0.5 * x * x + fwd);
        assert!((a - brute).abs() < 1e-10);
    }

    #[test]
    fn mala_without_energy_is_rejected() {
        let t = FnTarget::score_only(1, |x: &[f64], o: &mut [f64]| o[0] = -x[0]);
        let cfg = LangevinConfig::new(0.1, 3, true).unwrap();
        assert!(langevin_chain(&t, &[0.0], &cfg, &mut RngStream::new(0), false).is_err());
    }

    #[test]
    fn mala_small_step_acceptance() {
        let t = std_normal();
        let cfg = LangevinConfig::new(0.1, 1_000_000, true).unwrap();
        let out = langevin_chain(&t, &[0.0], &cfg, &mut RngStream::new(6), false).unwrap();
        let rate = out.accept_rate();
        assert!(rate > 0.5 && rate < 1.0, "{rate}");
        assert!(out.steps - out.accepted > 0);
    }

    #[test]
    fn deterministic_chains() {
        let t = std_normal();
        let cfg = LangevinConfig::new(0.5, 50, true).unwrap();
        let a = langevin_chain(&t, &[2.0], &cfg, &mut RngStream::new(8), true).unwrap();
        let b = langevin_chain(&t, &[2.0], &cfg, &mut RngStream::new(8), true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trajectory.unwrap().len(), 50);
    }

    #[test]
    fn schedule_validation() {
        assert!(NoiseSchedule::new(vec![]).is_err());
        assert!(NoiseSchedule::new(vec![1.0, 1.0]).is_err());
        assert!(NoiseSchedule::new(vec![1.0, -0.5]).is_err());
        let g = NoiseSchedule::geometric(2.0, 0.1, 5).unwrap();
        assert_eq!(g.sigmas().len(), 5);
        assert_eq!(g.sigmas()[0], 2.0);
        assert_eq!(g.smallest(), 0.1);
        assert!((g.sigmas()[1] / g.sigmas()[0] - g.sigmas()[3] / g.sigmas()[2]).abs() < 1e-12);
    }

    #[test]
    fn single_level_annealing_is_plain_langevin() {
        let sched = NoiseSchedule::new(vec![0.5]).unwrap();
        let cfg = LangevinConfig::new(0.2, 30, false).unwrap();
        let a = annealed_langevin(1, |x, _s, o| o[0] = -x[0], &sched, &cfg, &[3.0], &mut RngStream::new(2)).unwrap();
        let t = FnTarget::score_only(1, |x: &[f64], o: &mut [f64]| o[0] = -x[0]);
        let b = langevin_chain(&t, &[3.0], &cfg, &mut RngStream::new(2), false).unwrap();
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn levels_visited_in_decreasing_order() {
        let sched = NoiseSchedule::new(vec![1.0, 0.25]).unwrap();
        let cfg = LangevinConfig::new(0.1, 2, false).unwrap();
        let seen = std::cell::RefCell::new(Vec::new());
        let out = annealed_langevin(
            1,
            |x, s, o| {
                seen.borrow_mut().push(s);
                o[0] = -x[0];
            },
            &sched,
            &cfg,
            &[0.0],
            &mut RngStream::new(1),
        )
        .unwrap();
        assert_eq!(out.levels, vec![1.0, 0.25]);
        let seen = seen.into_inner();
        let first_small = seen.iter().position(|s| *s == 0.25).unwrap();
        assert!(seen[..first_small].iter().all(|s| *s == 1.0));
        assert!(seen[first_small..].iter().all(|s| *s == 0.25));
    }
}
