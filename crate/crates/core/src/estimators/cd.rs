use super::{axpy, check_batch, LossReport};
use crate::energy::{EnergyFamily, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::{RealVector, RngStream};
use crate::samplers::{fresh_init, run_chains, LangevinConfig, ModelTarget, ReplayBuffer};

/// Where contrastive-divergence chains start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdInit {
    /// One chain per datapoint, started at that point (CD-k).
    Data,
    /// Persistent chains drawn from a replay buffer (PCD).
    Buffer,
}

impl std::str::FromStr for CdInit {
    type Err = EbmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "data" => Ok(CdInit::Data),
            "buffer" => Ok(CdInit::Buffer),
            other => Err(EbmError::invalid(format!("unknown CD init `{other}` (data, buffer)"))),
        }
    }
}

/// Contrastive-divergence gradient
/// `mean ∇θE(data) − mean ∇θE(model samples)`, the negated log-likelihood
/// ascent direction. Model samples come from one Langevin chain per datapoint.
///
/// The `loss` field is the energy gap `mean E(data) − mean E(samples)`; it is a
/// diagnostic, not an objective. With [`CdInit::Buffer`] the chain finals are
/// pushed back into `buffer`.
pub fn cd_gradient(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    sampler: &LangevinConfig,
    init: CdInit,
    buffer: Option<&mut ReplayBuffer>,
    rng: &mut RngStream,
) -> Result<LossReport> {
    check_batch(family, batch)?;
    sampler.validate()?;
    let target = ModelTarget::new(family, theta)?;
    let d = family.dim();
    let (finals, rate) = match (init, buffer) {
        (CdInit::Data, _) => {
            let key = rng.next_u64();
            let chains = rng.split(key);
            run_chains(&target, batch, sampler, &chains)?
        }
        (CdInit::Buffer, Some(buf)) => {
            let starts: Vec<RealVector> =
                (0..batch.len()).map(|_| buf.init_sample(rng, |r| fresh_init(r, d))).collect();
            let key = rng.next_u64();
            let chains = rng.split(key);
            let (finals, rate) = run_chains(&target, &starts, sampler, &chains)?;
            for x in &finals {
                buf.push(x.clone(), rng)?;
            }
            (finals, rate)
        }
        (CdInit::Buffer, None) => return Err(EbmError::invalid("persistent CD needs a replay buffer")),
    };
    Ok(cd_gradient_from_samples(family, theta, batch, &finals)?.with("mala_accept_rate", rate))
}

/// The CD gradient for caller-supplied model samples.
pub fn cd_gradient_from_samples(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    samples: &[RealVector],
) -> Result<LossReport> {
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    check_batch(family, samples)?;
    let th = theta.values();
    let p = family.param_count();
    let mut gt = vec![0.0; p];
    let mut means = [vec![0.0; p], vec![0.0; p]];
    let mut energies = [0.0; 2];
    for (k, set) in [batch, samples].into_iter().enumerate() {
        let w = 1.0 / set.len() as f64;
        for x in set {
            family.grad_theta_raw(th, x, &mut gt);
            axpy(&mut means[k], w, &gt);
            energies[k] += w * family.energy_raw(th, x);
        }
    }
    let grad = means[0].iter().zip(&means[1]).map(|(a, b)| a - b).collect();
    let gap = energies[0] - energies[1];
    LossReport::new(gap, grad)
}
