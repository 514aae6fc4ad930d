use crate::energy::{EnergyFamily, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::{finite_diff_gradient, RealVector, RngStream};

/// Largest parameter count accepted by the finite-difference gradient path.
pub const FD_PARAM_LIMIT: usize = 64;

const FD_STEP: f64 = 1e-5;

/// θ-gradient of a stochastic loss by central differences with common random
/// numbers: every evaluation receives a fresh clone of `rng`, so the noise is
/// identical on both sides of each difference.
pub fn estimator_grad_theta<F>(
    family: &EnergyFamily,
    theta: &ParamVector,
    mut loss: F,
    rng: &RngStream,
) -> Result<RealVector>
where
    F: FnMut(&ParamVector, &mut RngStream) -> Result<f64>,
{
    let n = theta.len();
    if n > FD_PARAM_LIMIT {
        return Err(EbmError::ParamLimit { param_count: n, limit: FD_PARAM_LIMIT });
    }
    family.check_theta(theta)?;
    finite_diff_gradient(
        |t| {
            let probe = theta.with_values(t.to_vec())?;
            loss(&probe, &mut rng.clone())
        },
        theta.values(),
        FD_STEP,
    )
}
