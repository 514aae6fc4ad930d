//! Gaussian energy `E(x) = ½ (x-μ)ᵀ P (x-μ)` with `P = L Lᵀ`.
//!
//! θ = (μ, packed lower triangle of L row by row, diagonal entries stored as
//! logs). The constant term is fixed to zero.

use super::params::ParamBlock;

pub(super) fn layout(d: usize) -> Vec<ParamBlock> {
    vec![
        ParamBlock { name: "mu".into(), offset: 0, len: d },
        ParamBlock { name: "chol".into(), offset: d, len: d * (d + 1) / 2 },
    ]
}

#[inline]
fn tri(i: usize, k: usize) -> usize {
    i * (i + 1) / 2 + k
}

/// Dense row-major L.
pub(super) fn cholesky(d: usize, th: &[f64]) -> Vec<f64> {
    let packed = &th[d..];
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..i {
            l[i * d + k] = packed[tri(i, k)];
        }
        l[i * d + i] = packed[tri(i, i)].exp();
    }
    l
}

/// `Lᵀ y`.
fn lt_mul(d: usize, l: &[f64], y: &[f64], out: &mut [f64]) {
    for k in 0..d {
        out[k] = (k..d).map(|i| l[i * d + k] * y[i]).sum();
    }
}

/// `L y`.
fn l_mul(d: usize, l: &[f64], y: &[f64], out: &mut [f64]) {
    for i in 0..d {
        out[i] = (0..=i).map(|k| l[i * d + k] * y[k]).sum();
    }
}

pub(super) fn energy(d: usize, th: &[f64], x: &[f64]) -> f64 {
    if d == 1 {
        let r = x[0] - th[0];
        return 0.5 * (2.0 * th[1]).exp() * r * r;
    }
    let l = cholesky(d, th);
    let r: Vec<f64> = x.iter().zip(th).map(|(a, b)| a - b).collect();
    let mut u = vec![0.0; d];
    lt_mul(d, &l, &r, &mut u);
    0.5 * u.iter().map(|v| v * v).sum::<f64>()
}

pub(super) fn grad_x(d: usize, th: &[f64], x: &[f64], out: &mut [f64]) {
    if d == 1 {
        out[0] = (2.0 * th[1]).exp() * (x[0] - th[0]);
        return;
    }
    let l = cholesky(d, th);
    let r: Vec<f64> = x.iter().zip(th).map(|(a, b)| a - b).collect();
    let mut u = vec![0.0; d];
    lt_mul(d, &l, &r, &mut u);
    l_mul(d, &l, &u, out);
}

pub(super) fn hvp(d: usize, th: &[f64], v: &[f64], out: &mut [f64]) {
    if d == 1 {
        let l = th[1].exp();
        out[0] = l * (l * v[0]);
        return;
    }
    let l = cholesky(d, th);
    let mut u = vec![0.0; d];
    lt_mul(d, &l, v, &mut u);
    l_mul(d, &l, &u, out);
}

/// `tr P`, summed row by row in the same order as `Σᵢ (P eᵢ)ᵢ`.
pub(super) fn laplacian(d: usize, th: &[f64]) -> f64 {
    if d == 1 {
        let l = th[1].exp();
        return l * l;
    }
    let l = cholesky(d, th);
    (0..d).map(|i| (0..=i).map(|k| l[i * d + k] * l[i * d + k]).sum::<f64>()).sum()
}

/// Writes `∂/∂L_ik` of a bilinear-in-L quantity into the packed block, given a
/// closure for the dense derivative, applying the log-diagonal chain rule.
fn write_chol_grad(d: usize, l: &[f64], out: &mut [f64], dense: impl Fn(usize, usize) -> f64) {
    for i in 0..d {
        for k in 0..=i {
            let g = dense(i, k);
            out[d + tri(i, k)] = if i == k { g * l[i * d + i] } else { g };
        }
    }
}

pub(super) fn grad_theta(d: usize, th: &[f64], x: &[f64], out: &mut [f64]) {
    if d == 1 {
        let l = th[1].exp();
        let r = x[0] - th[0];
        let u = l * r;
        out[0] = -(l * u);
        out[1] = r * u * l;
        return;
    }
    let l = cholesky(d, th);
    let r: Vec<f64> = x.iter().zip(th).map(|(a, b)| a - b).collect();
    let mut u = vec![0.0; d];
    lt_mul(d, &l, &r, &mut u);
    let mut g = vec![0.0; d];
    l_mul(d, &l, &u, &mut g);
    for i in 0..d {
        out[i] = -g[i];
    }
    write_chol_grad(d, &l, out, |i, k| r[i] * u[k]);
}

/// `∇_θ (wᵀ ∇ₓE)` at x.
pub(super) fn mixed_dir(d: usize, th: &[f64], x: &[f64], w: &[f64], out: &mut [f64]) {
    if d == 1 {
        let l = th[1].exp();
        let r = x[0] - th[0];
        let (u, a) = (l * r, l * w[0]);
        out[0] = -(l * a);
        out[1] = (w[0] * u + r * a) * l;
        return;
    }
    let l = cholesky(d, th);
    let r: Vec<f64> = x.iter().zip(th).map(|(a, b)| a - b).collect();
    let mut u = vec![0.0; d];
    let mut a = vec![0.0; d];
    lt_mul(d, &l, &r, &mut u);
    lt_mul(d, &l, w, &mut a);
    let mut pw = vec![0.0; d];
    l_mul(d, &l, &a, &mut pw);
    for i in 0..d {
        out[i] = -pw[i];
    }
    write_chol_grad(d, &l, out, |i, k| w[i] * u[k] + r[i] * a[k]);
}

/// `∇_θ (vᵀ H v)`.
pub(super) fn mixed_quad(d: usize, th: &[f64], v: &[f64], out: &mut [f64]) {
    if d == 1 {
        let l = th[1].exp();
        out[0] = 0.0;
        out[1] = 2.0 * v[0] * (l * v[0]) * l;
        return;
    }
    let l = cholesky(d, th);
    let mut b = vec![0.0; d];
    lt_mul(d, &l, v, &mut b);
    out[..d].fill(0.0);
    write_chol_grad(d, &l, out, |i, k| 2.0 * v[i] * b[k]);
}

/// `∇_θ tr H`.
pub(super) fn mixed_laplacian(d: usize, th: &[f64], out: &mut [f64]) {
    if d == 1 {
        let l = th[1].exp();
        out[0] = 0.0;
        out[1] = 2.0 * l * l;
        return;
    }
    let l = cholesky(d, th);
    out[..d].fill(0.0);
    write_chol_grad(d, &l, out, |i, k| 2.0 * l[i * d + k]);
}

/// Diagonal of `P⁻¹`, via `L⁻¹` (forward substitution on the identity).
pub(super) fn marginal_variances(d: usize, th: &[f64]) -> Vec<f64> {
    let l = cholesky(d, th);
    // P⁻¹ = L⁻ᵀ L⁻¹, so (P⁻¹)_jj = Σ_i (L⁻¹)_ij².
    let mut inv = vec![0.0; d * d];
    for c in 0..d {
        for i in 0..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * d + k] * inv[k * d + c];
            }
            inv[i * d + c] = s / l[i * d + i];
        }
    }
    (0..d).map(|j| (0..d).map(|i| inv[i * d + j].powi(2)).sum()).collect()
}
