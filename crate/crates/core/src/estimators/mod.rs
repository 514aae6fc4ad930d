//! Training estimators. Every estimator is phrased as a loss to minimize and
//! returns a [`LossReport`].
//!
//! The Hessian term in the implicit and sliced score-matching objectives enters
//! with a minus sign (`½‖∇ₓE‖² − ΔₓE`), which is what integration by parts of
//! the explicit Fisher divergence gives for `log p = −E − log Z`.
//! [`HessianSign::Plus`] exists only so the check suite can show that the
//! Fisher-divergence oracle rejects the other sign.

mod cd;
mod fd;
mod ksd;
mod nce;
mod score_matching;

use std::collections::BTreeMap;

pub use cd::{cd_gradient, cd_gradient_from_samples, CdInit};
pub use fd::{estimator_grad_theta, FD_PARAM_LIMIT};
pub use ksd::{ksd, ksd_estimate, KsdEstimate};
pub use nce::{nce_loss, shifted_nce_loss, NceConfig};
pub use score_matching::{
    dsm_cv_loss, dsm_loss, sliced_objective, sm_loss, sm_loss_signed, ssm_loss, ssm_loss_with_projections, HessianSign,
    Projection, SliceConfig,
};

use crate::error::{EbmError, Result};
use crate::numerics::RealVector;

/// Loss value, θ-gradient, and named diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub grad_theta: RealVector,
    pub aux: BTreeMap<String, f64>,
}

impl LossReport {
    pub(crate) fn new(loss: f64, grad: Vec<f64>) -> Result<Self> {
        if !loss.is_finite() {
            return Err(EbmError::NonFinite { context: "loss".into(), index: 0 });
        }
        Ok(Self { loss, grad_theta: RealVector::new(grad)?, aux: BTreeMap::new() })
    }

    pub(crate) fn with(mut self, key: &str, value: f64) -> Self {
        self.aux.insert(key.to_string(), value);
        self
    }

    pub fn aux(&self, key: &str) -> Option<f64> {
        self.aux.get(key).copied()
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_theta.norm()
    }
}

/// Running mean / variance (Welford) in a fixed summation order.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n − 1 denominator).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.n.max(1) as f64).sqrt()
    }
}

pub(crate) fn check_batch(family: &crate::energy::EnergyFamily, batch: &[RealVector]) -> Result<()> {
    if batch.is_empty() {
        return Err(EbmError::invalid("batch is empty"));
    }
    for x in batch {
        family.check_x(x)?;
    }
    Ok(())
}

pub(crate) fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (s, v) in acc.iter_mut().zip(x) {
        *s += a * v;
    }
}
