//! Closed-form divergences between diagonal Gaussians. These are test and
//! experiment oracles; no estimator calls them.

use super::{EnergyFamily, FamilyKind, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::{RealVector, RngStream};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal-covariance Gaussian density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    pub mean: RealVector,
    pub variance: RealVector,
}

impl GaussianDensity {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.len() != variance.len() {
            return Err(EbmError::invalid("mean and variance dims differ"));
        }
        if variance.iter().any(|v| !(*v > 0.0)) {
            return Err(EbmError::invalid("variance must be positive definite"));
        }
        Ok(Self { mean: RealVector::new(mean)?, variance: RealVector::new(variance)? })
    }

    /// Isotropic `N(mean·1, std²·I)` in `dim` dimensions.
    pub fn isotropic(dim: usize, mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![mean; dim], vec![std * std; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let v = self.variance[i];
            let r = x[i] - self.mean[i];
            acc -= 0.5 * (LN_2PI + v.ln() + r * r / v);
        }
        acc
    }

    /// `∇ₓ log p(x)`.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| -(x[i] - self.mean[i]) / self.variance[i]).collect()
    }

    pub fn sample(&self, rng: &mut RngStream) -> RealVector {
        let mut z = vec![0.0; self.dim()];
        rng.fill_normal(&mut z);
        for i in 0..z.len() {
            z[i] = self.mean[i] + self.variance[i].sqrt() * z[i];
        }
        RealVector::from_raw(z)
    }

    pub fn sample_n(&self, rng: &mut RngStream, n: usize) -> Vec<RealVector> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    /// Convolution with `N(0, t·I)`.
    pub fn smoothed(&self, t: f64) -> Result<Self> {
        Self::new(self.mean.to_vec(), self.variance.iter().map(|v| v + t).collect())
    }
}

fn check_pair(p: &GaussianDensity, q: &GaussianDensity) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(EbmError::invalid("Gaussian dims differ"));
    }
    if p.variance.iter().chain(q.variance.iter()).any(|v| !(*v > 0.0)) {
        return Err(EbmError::invalid("variance must be positive definite"));
    }
    Ok(())
}

/// `KL(p ‖ q)`.
pub fn gaussian_kl(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    check_pair(p, q)?;
    Ok((0..p.dim())
        .map(|i| {
            let (vp, vq) = (p.variance[i], q.variance[i]);
            let dm = p.mean[i] - q.mean[i];
            0.5 * ((vq / vp).ln() + (vp + dm * dm) / vq - 1.0)
        })
        .sum())
}

/// `D_F(p ‖ q) = ½ E_p ‖∇log p − ∇log q‖²`.
///
/// Per dimension the score difference is affine, `a x + b`, so the
/// expectation is `a² v_p + (a m_p + b)²`.
pub fn gaussian_fisher_divergence(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    check_pair(p, q)?;
    Ok((0..p.dim())
        .map(|i| {
            let (mp, vp, mq, vq) = (p.mean[i], p.variance[i], q.mean[i], q.variance[i]);
            let a = 1.0 / vq - 1.0 / vp;
            let b = mp / vp - mq / vq;
            0.5 * (a * a * vp + (a * mp + b).powi(2))
        })
        .sum())
}

/// `∇_θ D_F(data ‖ p_θ)` for a one-dimensional Gaussian model with
/// θ = (μ, log √precision).
pub fn fisher_grad_theta_gaussian1(
    family: &EnergyFamily,
    theta: &ParamVector,
    data: &GaussianDensity,
) -> Result<RealVector> {
    if family.kind() != &(FamilyKind::Gaussian { dim: 1 }) || data.dim() != 1 {
        return Err(EbmError::invalid("closed-form Fisher gradient needs Gaussian(1)"));
    }
    family.check_theta(theta)?;
    let (mu, l) = (theta.values()[0], theta.values()[1]);
    let p = (2.0 * l).exp();
    let (m, v) = (data.mean[0], data.variance[0]);
    // D_F = ½[(P − 1/v)² v + P² (m − μ)²]
    let d_mu = -p * p * (m - mu);
    let d_p = (p - 1.0 / v) * v + p * (m - mu).powi(2);
    RealVector::new(vec![d_mu, d_p * 2.0 * p])
}
