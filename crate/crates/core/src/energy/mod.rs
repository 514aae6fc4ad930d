//! Parametric energy families with exact x- and θ-derivatives, plus
//! closed-form Gaussian divergence oracles.

mod gaussian;
mod mixture;
mod mlp;
mod oracle;
mod params;
mod poly;

use std::fmt;

pub use oracle::{fisher_grad_theta_gaussian1, gaussian_fisher_divergence, gaussian_kl, GaussianDensity};
pub use params::{ParamBlock, ParamVector};

use crate::error::{EbmError, Result};
use crate::numerics::{RealVector, RngStream};

/// Which parametric form an [`EnergyFamily`] has.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FamilyKind {
    Gaussian {
        dim: usize,
    },
    MixtureRbf {
        components: usize,
        dim: usize,
    },
    Poly1d {
        degree: usize,
    },
    /// Layer widths including input `dim` and the scalar output.
    Mlp {
        layers: Vec<usize>,
    },
}

/// A parametric energy `E_θ : R^d -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyFamily {
    kind: FamilyKind,
    dim: usize,
    layout: Vec<ParamBlock>,
}

impl fmt::Display for EnergyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            FamilyKind::Gaussian { dim } => write!(f, "Gaussian({dim})"),
            FamilyKind::MixtureRbf { components, dim } => write!(f, "MixtureRBF({components}, {dim})"),
            FamilyKind::Poly1d { degree } => write!(f, "Poly1D({degree})"),
            FamilyKind::Mlp { layers } => write!(f, "MLP({layers:?})"),
        }
    }
}

impl EnergyFamily {
    pub fn gaussian(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(EbmError::InvalidDimension("Gaussian family needs dim >= 1".into()));
        }
        Ok(Self { kind: FamilyKind::Gaussian { dim }, dim, layout: gaussian::layout(dim) })
    }

    pub fn mixture_rbf(components: usize, dim: usize) -> Result<Self> {
        if components == 0 || dim == 0 {
            return Err(EbmError::InvalidDimension("mixture needs K >= 1 and dim >= 1".into()));
        }
        Ok(Self { kind: FamilyKind::MixtureRbf { components, dim }, dim, layout: mixture::layout(components, dim) })
    }

    pub fn poly1d(degree: usize) -> Result<Self> {
        if degree < 2 || !degree.is_multiple_of(2) {
            return Err(EbmError::invalid(format!("Poly1D degree must be even and >= 2, got {degree}")));
        }
        Ok(Self { kind: FamilyKind::Poly1d { degree }, dim: 1, layout: poly::layout(degree) })
    }

    /// Softplus MLP with the given hidden widths.
    pub fn mlp(dim: usize, hidden: &[usize]) -> Result<Self> {
        if dim == 0 || hidden.contains(&0) {
            return Err(EbmError::InvalidDimension("MLP widths must be >= 1".into()));
        }
        let mut layers = vec![dim];
        layers.extend_from_slice(hidden);
        layers.push(1);
        let layout = mlp::layout(&layers);
        Ok(Self { kind: FamilyKind::Mlp { layers }, dim, layout })
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_count(&self) -> usize {
        self.layout.iter().map(|b| b.len).sum()
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    /// Wraps raw values in this family's layout.
    pub fn params(&self, values: Vec<f64>) -> Result<ParamVector> {
        ParamVector::new(values, self.layout.clone())
    }

    /// Gaussian θ from a mean and a diagonal precision.
    pub fn gaussian_params(&self, mean: &[f64], precision_diag: &[f64]) -> Result<ParamVector> {
        let FamilyKind::Gaussian { dim } = self.kind else {
            return Err(EbmError::invalid("gaussian_params on a non-Gaussian family"));
        };
        if mean.len() != dim || precision_diag.len() != dim {
            return Err(EbmError::invalid("mean/precision length must equal dim"));
        }
        if precision_diag.iter().any(|p| !(*p > 0.0)) {
            return Err(EbmError::invalid("precision must be positive"));
        }
        let mut v = mean.to_vec();
        for i in 0..dim {
            for k in 0..=i {
                v.push(if i == k { 0.5 * precision_diag[i].ln() } else { 0.0 });
            }
        }
        self.params(v)
    }

    /// Mixture θ from weights (positive, normalized internally), means (K×d)
    /// and scales.
    pub fn mixture_params(&self, weights: &[f64], means: &[f64], scales: &[f64]) -> Result<ParamVector> {
        let FamilyKind::MixtureRbf { components, dim } = self.kind else {
            return Err(EbmError::invalid("mixture_params on a non-mixture family"));
        };
        if weights.len() != components || scales.len() != components || means.len() != components * dim {
            return Err(EbmError::invalid("mixture parameter lengths do not match K and dim"));
        }
        if weights.iter().chain(scales).any(|v| !(*v > 0.0)) {
            return Err(EbmError::invalid("mixture weights and scales must be positive"));
        }
        let mut v: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        v.extend_from_slice(means);
        v.extend(scales.iter().map(|s| s.ln()));
        self.params(v)
    }

    /// Poly1D θ from coefficients a_0..a_degree (a_degree > 0).
    pub fn poly_params(&self, coefs: &[f64]) -> Result<ParamVector> {
        let FamilyKind::Poly1d { degree } = self.kind else {
            return Err(EbmError::invalid("poly_params on a non-polynomial family"));
        };
        if coefs.len() != degree + 1 || !(coefs[degree] > 0.0) {
            return Err(EbmError::invalid("need degree+1 coefficients with a positive leading term"));
        }
        let mut v = coefs[..degree].to_vec();
        v.push(coefs[degree].ln());
        self.params(v)
    }

    /// A random parameter draw suitable for gradient checks and initialization.
    pub fn random_params(&self, rng: &mut RngStream) -> ParamVector {
        let n = self.param_count();
        let mut v = vec![0.0; n];
        rng.fill_normal(&mut v);
        match &self.kind {
            FamilyKind::Gaussian { dim } => {
                for x in &mut v[*dim..] {
                    *x *= 0.3;
                }
            }
            FamilyKind::MixtureRbf { components, dim } => {
                let k = *components;
                for x in &mut v[k..k + k * dim] {
                    *x *= 1.5;
                }
                for x in &mut v[k + k * dim..] {
                    *x *= 0.3;
                }
            }
            FamilyKind::Poly1d { .. } => {
                for x in &mut v {
                    *x *= 0.5;
                }
            }
            FamilyKind::Mlp { layers } => {
                for b in &self.layout {
                    let l: usize = b.name[1..].parse().unwrap_or(0);
                    let s = if b.name.starts_with('w') { (1.0 / layers[l] as f64).sqrt() } else { 0.1 };
                    for x in &mut v[b.offset..b.offset + b.len] {
                        *x *= s;
                    }
                }
            }
        }
        self.params(v).expect("finite draws")
    }

    /// Index of the parameter that shifts the energy by a constant, if the
    /// family has one.
    pub fn offset_param(&self) -> Option<usize> {
        match &self.kind {
            FamilyKind::Poly1d { .. } => Some(0),
            FamilyKind::Mlp { .. } => Some(self.param_count() - 1),
            _ => None,
        }
    }

    /// True when the mixed derivatives `∇_θ ∇ₓE` and `∇_θ ∇ₓ²E` are available
    /// in closed form.
    pub fn has_mixed_derivatives(&self) -> bool {
        matches!(self.kind, FamilyKind::Gaussian { .. } | FamilyKind::Poly1d { .. })
    }

    /// Marginal means and variances of a Gaussian θ.
    pub fn gaussian_marginals(&self, theta: &ParamVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let FamilyKind::Gaussian { dim } = self.kind else {
            return Err(EbmError::invalid("gaussian_marginals on a non-Gaussian family"));
        };
        self.check_theta(theta)?;
        let th = theta.values();
        Ok((th[..dim].to_vec(), gaussian::marginal_variances(dim, th)))
    }

    pub(crate) fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.layout() != self.layout.as_slice() {
            return Err(EbmError::invalid(format!("parameter layout does not match {self}")));
        }
        Ok(())
    }

    pub(crate) fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(EbmError::invalid(format!("{self} expects points of dim {}, got {}", self.dim, x.len())));
        }
        Ok(())
    }

    // Unchecked slice-level kernels. Callers validate shapes once up front.

    pub(crate) fn energy_raw(&self, th: &[f64], x: &[f64]) -> f64 {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::energy(*dim, th, x),
            FamilyKind::MixtureRbf { components, dim } => mixture::eval(*components, *dim, th, x).energy,
            FamilyKind::Poly1d { degree } => poly::derivs(*degree, th, x[0]).0,
            FamilyKind::Mlp { layers } => {
                let net = mlp::Net::new(layers, th);
                net.energy(&net.forward(x))
            }
        }
    }

    /// `∇ₓE` (not negated).
    pub(crate) fn grad_x_raw(&self, th: &[f64], x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::grad_x(*dim, th, x, out),
            FamilyKind::MixtureRbf { components, dim } => {
                match (*dim == 1).then(|| mixture::grad_x_1d(*components, th, x[0])).flatten() {
                    Some(g) => out[0] = g,
                    None => mixture::eval(*components, *dim, th, x).grad_x(*dim, out),
                }
            }
            FamilyKind::Poly1d { degree } => out[0] = poly::derivs(*degree, th, x[0]).1,
            FamilyKind::Mlp { layers } => {
                let net = mlp::Net::new(layers, th);
                net.grad_x(&net.forward(x), out)
            }
        }
    }

    pub(crate) fn grad_theta_raw(&self, th: &[f64], x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::grad_theta(*dim, th, x, out),
            FamilyKind::MixtureRbf { components, dim } => {
                mixture::eval(*components, *dim, th, x).grad_theta(*components, *dim, th, out)
            }
            FamilyKind::Poly1d { degree } => poly::combo_grad(*degree, th, x[0], [1.0, 0.0, 0.0], out),
            FamilyKind::Mlp { layers } => {
                let net = mlp::Net::new(layers, th);
                net.grad_theta(&net.forward(x), out)
            }
        }
    }

    pub(crate) fn hvp_raw(&self, th: &[f64], x: &[f64], v: &[f64], out: &mut [f64]) {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::hvp(*dim, th, v, out),
            FamilyKind::MixtureRbf { components, dim } => mixture::eval(*components, *dim, th, x).hvp(*dim, v, out),
            FamilyKind::Poly1d { degree } => out[0] = poly::derivs(*degree, th, x[0]).2 * v[0],
            FamilyKind::Mlp { layers } => {
                let net = mlp::Net::new(layers, th);
                net.hvp(&net.forward(x), v, out)
            }
        }
    }

    pub(crate) fn laplacian_raw(&self, th: &[f64], x: &[f64]) -> f64 {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::laplacian(*dim, th),
            FamilyKind::MixtureRbf { components, dim } => {
                let ev = mixture::eval(*components, *dim, th, x);
                let mut e = vec![0.0; *dim];
                let mut hv = vec![0.0; *dim];
                let mut acc = 0.0;
                for i in 0..*dim {
                    e[i] = 1.0;
                    ev.hvp(*dim, &e, &mut hv);
                    acc += hv[i];
                    e[i] = 0.0;
                }
                acc
            }
            FamilyKind::Poly1d { degree } => poly::derivs(*degree, th, x[0]).2,
            FamilyKind::Mlp { layers } => {
                let net = mlp::Net::new(layers, th);
                let f = net.forward(x);
                let mut e = vec![0.0; self.dim];
                let mut hv = vec![0.0; self.dim];
                let mut acc = 0.0;
                for i in 0..self.dim {
                    e[i] = 1.0;
                    net.hvp(&f, &e, &mut hv);
                    acc += hv[i];
                    e[i] = 0.0;
                }
                acc
            }
        }
    }

    /// `∇_θ (wᵀ ∇ₓE(x))`; returns false when not available in closed form.
    pub(crate) fn mixed_dir_raw(&self, th: &[f64], x: &[f64], w: &[f64], out: &mut [f64]) -> bool {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::mixed_dir(*dim, th, x, w, out),
            FamilyKind::Poly1d { degree } => poly::combo_grad(*degree, th, x[0], [0.0, w[0], 0.0], out),
            _ => return false,
        }
        true
    }

    /// `∇_θ (vᵀ ∇ₓ²E(x) v)`.
    pub(crate) fn mixed_quad_raw(&self, th: &[f64], x: &[f64], v: &[f64], out: &mut [f64]) -> bool {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::mixed_quad(*dim, th, v, out),
            FamilyKind::Poly1d { degree } => poly::combo_grad(*degree, th, x[0], [0.0, 0.0, v[0] * v[0]], out),
            _ => return false,
        }
        true
    }

    /// `∇_θ ΔₓE(x)`.
    pub(crate) fn mixed_laplacian_raw(&self, th: &[f64], x: &[f64], out: &mut [f64]) -> bool {
        match &self.kind {
            FamilyKind::Gaussian { dim } => gaussian::mixed_laplacian(*dim, th, out),
            FamilyKind::Poly1d { degree } => poly::combo_grad(*degree, th, x[0], [0.0, 0.0, 1.0], out),
            _ => return false,
        }
        true
    }

    fn checked(&self, theta: &ParamVector, x: &[f64]) -> Result<()> {
        self.check_theta(theta)?;
        self.check_x(x)
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EbmError::NonFinite { context: what.into(), index: 0 })
    }
}

/// `E_θ(x)`.
pub fn energy(family: &EnergyFamily, theta: &ParamVector, x: &[f64]) -> Result<f64> {
    family.checked(theta, x)?;
    finite(family.energy_raw(theta.values(), x), "energy")
}

/// `∇ₓ log p_θ(x) = -∇ₓE_θ(x)`.
pub fn score(family: &EnergyFamily, theta: &ParamVector, x: &[f64]) -> Result<RealVector> {
    family.checked(theta, x)?;
    let mut out = vec![0.0; family.dim()];
    family.grad_x_raw(theta.values(), x, &mut out);
    for v in &mut out {
        *v = -*v;
    }
    RealVector::new(out)
}

/// `∇_θE_θ(x)`, including the chain rule through log-space storage.
pub fn grad_theta_energy(family: &EnergyFamily, theta: &ParamVector, x: &[f64]) -> Result<RealVector> {
    family.checked(theta, x)?;
    let mut out = vec![0.0; family.param_count()];
    family.grad_theta_raw(theta.values(), x, &mut out);
    RealVector::new(out)
}

/// `∇ₓ²E_θ(x) · v`.
pub fn hvp_x(family: &EnergyFamily, theta: &ParamVector, x: &[f64], v: &[f64]) -> Result<RealVector> {
    family.checked(theta, x)?;
    family.check_x(v)?;
    let mut out = vec![0.0; family.dim()];
    family.hvp_raw(theta.values(), x, v, &mut out);
    RealVector::new(out)
}

/// `Σᵢ ∂²E/∂xᵢ²`.
pub fn laplacian_x(family: &EnergyFamily, theta: &ParamVector, x: &[f64]) -> Result<f64> {
    family.checked(theta, x)?;
    finite(family.laplacian_raw(theta.values(), x), "laplacian")
}

#[cfg(test)]
mod tests;
