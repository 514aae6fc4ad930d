//! Isotropic Gaussian mixture energy
//! `E(x) = -log Σ_k softmax(w)_k N(x; μ_k, s_k² I)`.
//!
//! θ = (logits w, means μ row-major K×d, log scales log s).

use super::params::ParamBlock;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub(super) fn layout(k: usize, d: usize) -> Vec<ParamBlock> {
    vec![
        ParamBlock { name: "logit".into(), offset: 0, len: k },
        ParamBlock { name: "mean".into(), offset: k, len: k * d },
        ParamBlock { name: "log_scale".into(), offset: k + k * d, len: k },
    ]
}

pub(super) fn logsumexp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Per-component quantities at a point.
pub(super) struct Eval {
    pub energy: f64,
    /// Responsibilities r_k.
    pub resp: Vec<f64>,
    /// b_k = -(x - μ_k) / s_k², row-major K×d.
    pub b: Vec<f64>,
    /// 1 / s_k².
    pub inv_var: Vec<f64>,
    /// ‖x - μ_k‖² / s_k².
    pub maha: Vec<f64>,
}

pub(super) fn eval(k: usize, d: usize, th: &[f64], x: &[f64]) -> Eval {
    let logits = &th[..k];
    let means = &th[k..k + k * d];
    let log_s = &th[k + k * d..];
    let lse_w = logsumexp(logits);
    let mut a = vec![0.0; k];
    let mut b = vec![0.0; k * d];
    let mut inv_var = vec![0.0; k];
    let mut maha = vec![0.0; k];
    for c in 0..k {
        let iv = (-2.0 * log_s[c]).exp();
        let mut sq = 0.0;
        for i in 0..d {
            let r = x[i] - means[c * d + i];
            sq += r * r;
            b[c * d + i] = -r * iv;
        }
        inv_var[c] = iv;
        maha[c] = sq * iv;
        a[c] = logits[c] - lse_w - d as f64 * (log_s[c] + 0.5 * LN_2PI) - 0.5 * sq * iv;
    }
    let lse = logsumexp(&a);
    let resp = a.iter().map(|v| (v - lse).exp()).collect();
    Eval { energy: -lse, resp, b, inv_var, maha }
}

/// Allocation-free `dE/dx` for 1-D mixtures of at most 16 components; the
/// Langevin samplers call this once per step.
pub(super) fn grad_x_1d(k: usize, th: &[f64], x: f64) -> Option<f64> {
    if k > 16 {
        return None;
    }
    let mut a = [0.0; 16];
    let mut g = [0.0; 16];
    let mut m = f64::NEG_INFINITY;
    for c in 0..k {
        let iv = (-2.0 * th[2 * k + c]).exp();
        let r = x - th[k + c];
        // the logit normalizer is common to every component and cancels
        a[c] = th[c] - th[2 * k + c] - 0.5 * r * r * iv;
        g[c] = r * iv;
        m = m.max(a[c]);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..k {
        let w = (a[c] - m).exp();
        num += w * g[c];
        den += w;
    }
    Some(num / den)
}

impl Eval {
    fn bbar(&self, d: usize) -> Vec<f64> {
        let mut m = vec![0.0; d];
        for (c, r) in self.resp.iter().enumerate() {
            for i in 0..d {
                m[i] += r * self.b[c * d + i];
            }
        }
        m
    }

    pub fn grad_x(&self, d: usize, out: &mut [f64]) {
        let m = self.bbar(d);
        for i in 0..d {
            out[i] = -m[i];
        }
    }

    pub fn hvp(&self, d: usize, v: &[f64], out: &mut [f64]) {
        let m = self.bbar(d);
        let mv: f64 = m.iter().zip(v).map(|(a, b)| a * b).sum();
        let scale: f64 = self.resp.iter().zip(&self.inv_var).map(|(r, iv)| r * iv).sum();
        for i in 0..d {
            out[i] = scale * v[i] + m[i] * mv;
        }
        for (c, r) in self.resp.iter().enumerate() {
            let bc = &self.b[c * d..(c + 1) * d];
            let bv: f64 = bc.iter().zip(v).map(|(a, b)| a * b).sum();
            for i in 0..d {
                out[i] -= r * bc[i] * bv;
            }
        }
    }

    pub fn grad_theta(&self, k: usize, d: usize, th: &[f64], out: &mut [f64]) {
        let lse_w = logsumexp(&th[..k]);
        for c in 0..k {
            out[c] = (th[c] - lse_w).exp() - self.resp[c];
            for i in 0..d {
                out[k + c * d + i] = self.resp[c] * self.b[c * d + i];
            }
            out[k + k * d + c] = self.resp[c] * (d as f64 - self.maha[c]);
        }
    }
}
