//! One-dimensional polynomial energy `E(x) = Σ_j a_j x^j`, with the leading
//! coefficient stored as `log a_deg` so `exp(-E)` stays normalizable.

use super::params::ParamBlock;

pub(super) fn layout(degree: usize) -> Vec<ParamBlock> {
    vec![
        ParamBlock { name: "coef".into(), offset: 0, len: degree },
        ParamBlock { name: "log_lead".into(), offset: degree, len: 1 },
    ]
}

#[inline]
fn coef(degree: usize, th: &[f64], j: usize) -> f64 {
    if j == degree {
        th[degree].exp()
    } else {
        th[j]
    }
}

/// Returns (E, E', E'').
pub(super) fn derivs(degree: usize, th: &[f64], x: f64) -> (f64, f64, f64) {
    let (mut e, mut e1, mut e2) = (0.0, 0.0, 0.0);
    // Horner on all three at once, highest coefficient first.
    for j in (0..=degree).rev() {
        e2 = e2 * x + 2.0 * e1;
        e1 = e1 * x + e;
        e = e * x + coef(degree, th, j);
    }
    (e, e1, e2)
}

/// Writes `w0 · ∂θ E + w1 · ∂θ E' + w2 · ∂θ E''` into `out`.
pub(super) fn combo_grad(degree: usize, th: &[f64], x: f64, w: [f64; 3], out: &mut [f64]) {
    for j in 0..=degree {
        let jf = j as f64;
        let p0 = x.powi(j as i32);
        let p1 = if j >= 1 { jf * x.powi(j as i32 - 1) } else { 0.0 };
        let p2 = if j >= 2 { jf * (jf - 1.0) * x.powi(j as i32 - 2) } else { 0.0 };
        let g = w[0] * p0 + w[1] * p1 + w[2] * p2;
        out[j] = if j == degree { g * th[degree].exp() } else { g };
    }
}
