use super::check_batch;
use crate::energy::{EnergyFamily, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::RealVector;

/// U-statistic KSD with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsdEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Kernelized Stein discrepancy between the data batch and the model, as an
/// unbiased U-statistic over off-diagonal pairs with the RBF kernel
/// `exp(−‖x−y‖²/(2h²))`.
pub fn ksd(family: &EnergyFamily, theta: &ParamVector, batch: &[RealVector], bandwidth: f64) -> Result<f64> {
    Ok(ksd_estimate(family, theta, batch, bandwidth)?.value)
}

/// As [`ksd`], plus a standard error from the Hoeffding decomposition
/// `Var ≈ 4(N−2)/(N(N−1))·ζ₁ + 2/(N(N−1))·ζ₂`.
pub fn ksd_estimate(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    bandwidth: f64,
) -> Result<KsdEstimate> {
    if batch.len() < 2 {
        return Err(EbmError::invalid("KSD needs at least two points"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(EbmError::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    let d = family.dim();
    let n = batch.len();
    let th = theta.values();
    let mut scores = vec![0.0; n * d];
    for (x, s) in batch.iter().zip(scores.chunks_exact_mut(d)) {
        family.grad_x_raw(th, x, s);
        for v in s.iter_mut() {
            *v = -*v;
        }
    }
    let h2 = bandwidth * bandwidth;
    let dim_term = d as f64 / h2;
    let mut row = vec![0.0; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for i in 0..n {
        let (x, sx) = (&batch[i], &scores[i * d..(i + 1) * d]);
        for j in i + 1..n {
            let (y, sy) = (&batch[j], &scores[j * d..(j + 1) * d]);
            let (mut r2, mut ss, mut cross) = (0.0, 0.0, 0.0);
            for k in 0..d {
                let diff = x[k] - y[k];
                r2 += diff * diff;
                ss += sx[k] * sy[k];
                cross += (sx[k] - sy[k]) * diff;
            }
            let kern = (-0.5 * r2 / h2).exp();
            let u = kern * (ss + cross / h2 + dim_term - r2 / (h2 * h2));
            row[i] += u;
            row[j] += u;
            sum += u;
            sum_sq += u * u;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let value = sum / pairs;
    let zeta2 = (sum_sq / pairs - value * value).max(0.0);
    let nf = n as f64;
    let mut var_h = 0.0;
    for r in &row {
        let hi = r / (nf - 1.0);
        var_h += (hi - value) * (hi - value);
    }
    var_h /= nf;
    let zeta1 = (var_h - zeta2 / (nf - 1.0)).max(0.0);
    let var = 4.0 * (nf - 2.0) / (nf * (nf - 1.0)) * zeta1 + 2.0 / (nf * (nf - 1.0)) * zeta2;
    Ok(KsdEstimate { value, std_error: var.sqrt() })
}
