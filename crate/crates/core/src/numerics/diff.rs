use super::RealVector;
use crate::error::{EbmError, Result};

/// Central-difference gradient of `f` at `x`.
///
/// The step on coordinate `i` is `h * (1 + |x_i|)`.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<RealVector>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(EbmError::invalid("finite-difference step must be positive"));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let step = h * (1.0 + x[i].abs());
        probe[i] = x[i] + step;
        let up = f(&probe)?;
        probe[i] = x[i] - step;
        let down = f(&probe)?;
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(EbmError::NonFinite { context: "finite-difference evaluation".into(), index: i });
        }
        grad.push((up - down) / (2.0 * step));
    }
    Ok(RealVector::from_raw(grad))
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm, with a floor on the
/// denominator so two tiny vectors compare as equal.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}
