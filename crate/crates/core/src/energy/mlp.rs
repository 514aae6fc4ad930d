//! Fully connected softplus network `R^d -> R`. The final layer is linear and
//! its bias fixes the energy's additive constant.

use super::params::ParamBlock;

pub(super) fn layout(sizes: &[usize]) -> Vec<ParamBlock> {
    let mut blocks = Vec::new();
    let mut offset = 0;
    for l in 0..sizes.len() - 1 {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        blocks.push(ParamBlock { name: format!("w{l}"), offset, len: fan_in * fan_out });
        offset += fan_in * fan_out;
        blocks.push(ParamBlock { name: format!("b{l}"), offset, len: fan_out });
        offset += fan_out;
    }
    blocks
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(super) struct Net<'a> {
    sizes: &'a [usize],
    th: &'a [f64],
}

/// Activations from one forward pass: `acts[l]` is the input to layer l,
/// `pre[l]` its pre-activation.
pub(super) struct Forward {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl<'a> Net<'a> {
    pub fn new(sizes: &'a [usize], th: &'a [f64]) -> Self {
        Self { sizes, th }
    }

    fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// (weights, bias) slices of layer l.
    fn layer(&self, l: usize) -> (&[f64], &[f64], usize) {
        let mut off = 0;
        for j in 0..l {
            off += self.sizes[j] * self.sizes[j + 1] + self.sizes[j + 1];
        }
        let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
        (&self.th[off..off + fi * fo], &self.th[off + fi * fo..off + fi * fo + fo], off)
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers());
        for l in 0..self.layers() {
            let (w, b, _) = self.layer(l);
            let input = &acts[l];
            let fi = self.sizes[l];
            let z: Vec<f64> =
                (0..self.sizes[l + 1]).map(|o| b[o] + (0..fi).map(|i| w[o * fi + i] * input[i]).sum::<f64>()).collect();
            if l + 1 < self.layers() {
                acts.push(z.iter().map(|v| softplus(*v)).collect());
            }
            pre.push(z);
        }
        Forward { acts, pre }
    }

    pub fn energy(&self, f: &Forward) -> f64 {
        f.pre[self.layers() - 1][0]
    }

    /// `W_lᵀ δ`.
    fn back_matvec(&self, l: usize, delta: &[f64]) -> Vec<f64> {
        let (w, _, _) = self.layer(l);
        let fi = self.sizes[l];
        let mut out = vec![0.0; fi];
        for (o, dl) in delta.iter().enumerate() {
            for i in 0..fi {
                out[i] += w[o * fi + i] * dl;
            }
        }
        out
    }

    /// Per-layer deltas `∂E/∂z_l`, index by layer.
    fn deltas(&self, f: &Forward) -> Vec<Vec<f64>> {
        let n = self.layers();
        let mut deltas = vec![Vec::new(); n];
        deltas[n - 1] = vec![1.0];
        for l in (1..n).rev() {
            let ga = self.back_matvec(l, &deltas[l]);
            deltas[l - 1] = ga.iter().zip(&f.pre[l - 1]).map(|(g, z)| g * sigmoid(*z)).collect();
        }
        deltas
    }

    pub fn grad_x(&self, f: &Forward, out: &mut [f64]) {
        let deltas = self.deltas(f);
        out.copy_from_slice(&self.back_matvec(0, &deltas[0]));
    }

    pub fn grad_theta(&self, f: &Forward, out: &mut [f64]) {
        let deltas = self.deltas(f);
        for l in 0..self.layers() {
            let (_, _, off) = self.layer(l);
            let fi = self.sizes[l];
            let fo = self.sizes[l + 1];
            for o in 0..fo {
                for i in 0..fi {
                    out[off + o * fi + i] = deltas[l][o] * f.acts[l][i];
                }
                out[off + fi * fo + o] = deltas[l][o];
            }
        }
    }

    /// Forward-over-reverse: directional derivative of `∇ₓE` along v.
    pub fn hvp(&self, f: &Forward, v: &[f64], out: &mut [f64]) {
        let n = self.layers();
        // Tangent forward: ż_l for each layer.
        let mut zdot: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut adot = v.to_vec();
        for l in 0..n {
            let (w, _, _) = self.layer(l);
            let fi = self.sizes[l];
            let zd: Vec<f64> = (0..self.sizes[l + 1]).map(|o| (0..fi).map(|i| w[o * fi + i] * adot[i]).sum()).collect();
            if l + 1 < n {
                adot = zd.iter().zip(&f.pre[l]).map(|(d, z)| sigmoid(*z) * d).collect();
            }
            zdot.push(zd);
        }
        // Tangent backward.
        let mut delta = vec![1.0];
        let mut ddelta = vec![0.0];
        for l in (1..n).rev() {
            let ga = self.back_matvec(l, &delta);
            let gad = self.back_matvec(l, &ddelta);
            let z = &f.pre[l - 1];
            delta = ga.iter().zip(z).map(|(g, z)| g * sigmoid(*z)).collect();
            ddelta = (0..z.len())
                .map(|i| {
                    let s = sigmoid(z[i]);
                    gad[i] * s + ga[i] * s * (1.0 - s) * zdot[l - 1][i]
                })
                .collect();
        }
        out.copy_from_slice(&self.back_matvec(0, &ddelta));
    }
}
