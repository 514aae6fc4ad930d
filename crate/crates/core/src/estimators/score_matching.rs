use super::{axpy, check_batch, estimator_grad_theta, LossReport, Moments};
use crate::energy::{EnergyFamily, ParamVector};
use crate::error::{EbmError, Result};
use crate::numerics::{RealVector, RngStream};

/// Sign of the second-derivative term in the implicit objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianSign {
    /// `½‖∇ₓE‖² − ΔₓE`; matches the Fisher divergence.
    #[default]
    Minus,
    /// Debug-only flipped sign.
    Plus,
}

impl HessianSign {
    fn factor(self) -> f64 {
        match self {
            HessianSign::Minus => -1.0,
            HessianSign::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Gaussian,
    Rademacher,
}

impl std::str::FromStr for Projection {
    type Err = EbmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Projection::Gaussian),
            "rademacher" => Ok(Projection::Rademacher),
            other => Err(EbmError::invalid(format!("unknown projection `{other}` (gaussian, rademacher)"))),
        }
    }
}

impl std::fmt::Display for Projection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Projection::Gaussian => "gaussian",
            Projection::Rademacher => "rademacher",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceConfig {
    pub projection: Projection,
    pub num_slices: usize,
    pub variance_reduced: bool,
}

struct Scratch {
    g: Vec<f64>,
    hv: Vec<f64>,
    w: Vec<f64>,
    gt: Vec<f64>,
    gt2: Vec<f64>,
}

impl Scratch {
    fn new(d: usize, p: usize) -> Self {
        Self { g: vec![0.0; d], hv: vec![0.0; d], w: vec![0.0; d], gt: vec![0.0; p], gt2: vec![0.0; p] }
    }
}

fn finish(
    family: &EnergyFamily,
    theta: &ParamVector,
    mom: Moments,
    grad: Option<Vec<f64>>,
    n: usize,
    fallback: impl Fn(&ParamVector, &mut RngStream) -> Result<f64>,
    rng: &RngStream,
) -> Result<LossReport> {
    let grad = match grad {
        Some(mut g) => {
            for v in &mut g {
                *v /= n as f64;
            }
            g
        }
        None => estimator_grad_theta(family, theta, fallback, rng)?.into_vec(),
    };
    Ok(LossReport::new(mom.mean(), grad)?.with("loss_var", mom.variance()).with("loss_se", mom.std_error()))
}

/// Implicit score matching: mean of `½‖∇ₓE‖² − ΔₓE` over the batch.
pub fn sm_loss(family: &EnergyFamily, theta: &ParamVector, batch: &[RealVector]) -> Result<LossReport> {
    sm_loss_signed(family, theta, batch, HessianSign::Minus)
}

pub fn sm_loss_signed(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    sign: HessianSign,
) -> Result<LossReport> {
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    let (mom, grad) = sm_pass(family, theta.values(), batch, sign, family.has_mixed_derivatives());
    finish(
        family,
        theta,
        mom,
        grad,
        batch.len(),
        |t, _| Ok(sm_pass(family, t.values(), batch, sign, false).0.mean()),
        &RngStream::new(0),
    )
}

fn sm_pass(
    family: &EnergyFamily,
    th: &[f64],
    batch: &[RealVector],
    sign: HessianSign,
    with_grad: bool,
) -> (Moments, Option<Vec<f64>>) {
    let s = sign.factor();
    let mut sc = Scratch::new(family.dim(), family.param_count());
    let mut mom = Moments::default();
    let mut grad = with_grad.then(|| vec![0.0; family.param_count()]);
    for x in batch {
        family.grad_x_raw(th, x, &mut sc.g);
        let sq: f64 = sc.g.iter().map(|v| v * v).sum();
        mom.push(0.5 * sq + s * family.laplacian_raw(th, x));
        if let Some(acc) = grad.as_mut() {
            family.mixed_dir_raw(th, x, &sc.g, &mut sc.gt);
            family.mixed_laplacian_raw(th, x, &mut sc.gt2);
            axpy(acc, 1.0, &sc.gt);
            axpy(acc, s, &sc.gt2);
        }
    }
    (mom, grad)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(EbmError::invalid(format!("noise scale sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// Denoising score matching with `x̃ = x + σz`:
/// mean of `½‖z/σ + ∇ₓ log p_θ(x̃)‖²`. One fresh `z` per datapoint, drawn in
/// batch order from `rng`.
pub fn dsm_loss(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    sigma: f64,
    rng: &mut RngStream,
) -> Result<LossReport> {
    dsm_common(family, theta, batch, sigma, rng, false)
}

/// DSM minus half the zero-mean control variate
/// `c(x, z) = (2/σ) zᵀ∇ₓlog p_θ(x) + ‖z‖²/σ² − d/σ²`, using the same `z` as
/// the DSM term. The ½ matches the ½ in front of the squared norm, so the
/// subtracted quantity is the small-σ Taylor expansion of the DSM term.
///
/// `aux` carries the per-sample variance with (`var_cv`) and without
/// (`var_plain`) the control variate and the mean of `c` (`cv_mean`).
pub fn dsm_cv_loss(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    sigma: f64,
    rng: &mut RngStream,
) -> Result<LossReport> {
    dsm_common(family, theta, batch, sigma, rng, true)
}

struct DsmPass {
    plain: Moments,
    cv: Moments,
    c: Moments,
    grad: Option<Vec<f64>>,
}

fn dsm_pass(
    family: &EnergyFamily,
    th: &[f64],
    batch: &[RealVector],
    sigma: f64,
    rng: &mut RngStream,
    use_cv: bool,
    with_grad: bool,
) -> DsmPass {
    let d = family.dim();
    let mut sc = Scratch::new(d, family.param_count());
    let mut z = vec![0.0; d];
    let mut xt = vec![0.0; d];
    let mut out = DsmPass {
        plain: Moments::default(),
        cv: Moments::default(),
        c: Moments::default(),
        grad: with_grad.then(|| vec![0.0; family.param_count()]),
    };
    for x in batch {
        rng.fill_normal(&mut z);
        for i in 0..d {
            xt[i] = x[i] + sigma * z[i];
        }
        family.grad_x_raw(th, &xt, &mut sc.g);
        // residual w = z/σ + s(x̃) = z/σ − ∇E(x̃)
        for i in 0..d {
            sc.w[i] = z[i] / sigma - sc.g[i];
        }
        let term = 0.5 * sc.w.iter().map(|v| v * v).sum::<f64>();
        out.plain.push(term);
        if let Some(acc) = out.grad.as_mut() {
            family.mixed_dir_raw(th, &xt, &sc.w, &mut sc.gt);
            axpy(acc, -1.0, &sc.gt);
        }
        if use_cv {
            family.grad_x_raw(th, x, &mut sc.hv);
            let z_dot_score: f64 = -z.iter().zip(&sc.hv).map(|(a, b)| a * b).sum::<f64>();
            let zz: f64 = z.iter().map(|v| v * v).sum();
            let c = 2.0 / sigma * z_dot_score + zz / (sigma * sigma) - d as f64 / (sigma * sigma);
            out.c.push(c);
            out.cv.push(term - 0.5 * c);
            if let Some(acc) = out.grad.as_mut() {
                family.mixed_dir_raw(th, x, &z, &mut sc.gt);
                axpy(acc, 1.0 / sigma, &sc.gt);
            }
        }
    }
    out
}

fn dsm_common(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    sigma: f64,
    rng: &mut RngStream,
    use_cv: bool,
) -> Result<LossReport> {
    check_sigma(sigma)?;
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    let start = rng.clone();
    let pass = dsm_pass(family, theta.values(), batch, sigma, rng, use_cv, family.has_mixed_derivatives());
    let mom = if use_cv { pass.cv } else { pass.plain };
    let report = finish(
        family,
        theta,
        mom,
        pass.grad,
        batch.len(),
        |t, r| {
            let p = dsm_pass(family, t.values(), batch, sigma, r, use_cv, false);
            Ok(if use_cv { p.cv.mean() } else { p.plain.mean() })
        },
        &start,
    )?;
    Ok(if use_cv {
        report
            .with("var_plain", pass.plain.variance())
            .with("var_cv", pass.cv.variance())
            .with("cv_mean", pass.c.mean())
            .with("cv_se", pass.c.std_error())
    } else {
        report
    })
}

/// Per-(sample, slice) term and optional θ-gradient accumulation.
#[allow(clippy::too_many_arguments)]
fn slice_term(
    family: &EnergyFamily,
    th: &[f64],
    x: &[f64],
    v: &[f64],
    variance_reduced: bool,
    sign: f64,
    sc: &mut Scratch,
    grad: Option<&mut Vec<f64>>,
) -> f64 {
    family.grad_x_raw(th, x, &mut sc.g);
    family.hvp_raw(th, x, v, &mut sc.hv);
    let quad: f64 = v.iter().zip(&sc.hv).map(|(a, b)| a * b).sum();
    let vg: f64 = v.iter().zip(&sc.g).map(|(a, b)| a * b).sum();
    let first = if variance_reduced { 0.5 * sc.g.iter().map(|a| a * a).sum::<f64>() } else { 0.5 * vg * vg };
    if let Some(acc) = grad {
        if variance_reduced {
            family.mixed_dir_raw(th, x, &sc.g, &mut sc.gt);
            axpy(acc, 1.0, &sc.gt);
        } else {
            family.mixed_dir_raw(th, x, v, &mut sc.gt);
            axpy(acc, vg, &sc.gt);
        }
        family.mixed_quad_raw(th, x, v, &mut sc.gt2);
        axpy(acc, sign, &sc.gt2);
    }
    first + sign * quad
}

struct SlicePass {
    per_sample: Moments,
    slice_means: Moments,
    grad: Option<Vec<f64>>,
}

fn ssm_pass(
    family: &EnergyFamily,
    th: &[f64],
    batch: &[RealVector],
    cfg: &SliceConfig,
    sign: HessianSign,
    rng: &mut RngStream,
    with_grad: bool,
) -> SlicePass {
    let d = family.dim();
    let s = sign.factor();
    let mut sc = Scratch::new(d, family.param_count());
    let mut v = vec![0.0; d * cfg.num_slices];
    let mut slice_acc = vec![0.0; cfg.num_slices];
    let mut per_sample = Moments::default();
    let mut grad = with_grad.then(|| vec![0.0; family.param_count()]);
    for x in batch {
        match cfg.projection {
            Projection::Gaussian => rng.fill_normal(&mut v),
            Projection::Rademacher => rng.fill_rademacher(&mut v),
        }
        let mut sample_acc = 0.0;
        for (j, vj) in v.chunks_exact(d).enumerate() {
            let t = slice_term(family, th, x, vj, cfg.variance_reduced, s, &mut sc, grad.as_mut());
            slice_acc[j] += t;
            sample_acc += t;
        }
        per_sample.push(sample_acc / cfg.num_slices as f64);
    }
    let mut slice_means = Moments::default();
    for a in slice_acc {
        slice_means.push(a / batch.len() as f64);
    }
    if let Some(g) = grad.as_mut() {
        for v in g.iter_mut() {
            *v /= cfg.num_slices as f64;
        }
    }
    SlicePass { per_sample, slice_means, grad }
}

/// Sliced score matching. Per sample and slice `v`:
/// `½(vᵀ∇ₓE)² − vᵀ(∇ₓ²E)v`, or `½‖∇ₓE‖² − vᵀ(∇ₓ²E)v` when variance reduced.
/// Each (sample, slice) costs one Hessian-vector product. Projections are
/// drawn per sample as one block of `num_slices · d` entries.
///
/// `aux["slice_se"]` is the standard error across slices of the batch-mean
/// objective.
pub fn ssm_loss(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    cfg: &SliceConfig,
    rng: &mut RngStream,
) -> Result<LossReport> {
    ssm_loss_signed(family, theta, batch, cfg, HessianSign::Minus, rng)
}

pub(crate) fn ssm_loss_signed(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    cfg: &SliceConfig,
    sign: HessianSign,
    rng: &mut RngStream,
) -> Result<LossReport> {
    if cfg.num_slices == 0 {
        return Err(EbmError::invalid("sliced score matching needs at least one slice"));
    }
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    let start = rng.clone();
    let pass = ssm_pass(family, theta.values(), batch, cfg, sign, rng, family.has_mixed_derivatives());
    let se = pass.slice_means.std_error();
    let report = finish(
        family,
        theta,
        pass.per_sample,
        pass.grad,
        batch.len(),
        |t, r| Ok(ssm_pass(family, t.values(), batch, cfg, sign, r, false).per_sample.mean()),
        &start,
    )?;
    Ok(report.with("slice_se", se))
}

/// Sliced objective with caller-supplied projections, shared by every sample.
pub fn ssm_loss_with_projections(
    family: &EnergyFamily,
    theta: &ParamVector,
    batch: &[RealVector],
    projections: &[RealVector],
    variance_reduced: bool,
) -> Result<LossReport> {
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    if projections.is_empty() {
        return Err(EbmError::invalid("need at least one projection"));
    }
    for v in projections {
        family.check_x(v)?;
    }
    let th = theta.values();
    let pass = |t: &[f64], with_grad: bool| {
        let mut sc = Scratch::new(family.dim(), family.param_count());
        let mut grad = with_grad.then(|| vec![0.0; family.param_count()]);
        let mut mom = Moments::default();
        for x in batch {
            let mut acc = 0.0;
            for v in projections {
                acc += slice_term(family, t, x, v, variance_reduced, -1.0, &mut sc, grad.as_mut());
            }
            mom.push(acc / projections.len() as f64);
        }
        if let Some(g) = grad.as_mut() {
            for v in g.iter_mut() {
                *v /= projections.len() as f64;
            }
        }
        (mom, grad)
    };
    let (mom, grad) = pass(th, family.has_mixed_derivatives());
    finish(family, theta, mom, grad, batch.len(), |t, _| Ok(pass(t.values(), false).0.mean()), &RngStream::new(0))
}

/// Batch mean of `½(vᵀ∇ₓE)² − vᵀ(∇ₓ²E)v` for one fixed direction.
pub fn sliced_objective(family: &EnergyFamily, theta: &ParamVector, batch: &[RealVector], v: &[f64]) -> Result<f64> {
    family.check_theta(theta)?;
    check_batch(family, batch)?;
    family.check_x(v)?;
    let mut sc = Scratch::new(family.dim(), family.param_count());
    let mut mom = Moments::default();
    for x in batch {
        mom.push(slice_term(family, theta.values(), x, v, false, -1.0, &mut sc, None));
    }
    Ok(mom.mean())
}
