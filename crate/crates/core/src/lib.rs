//! Energy-based model training estimators with analytic oracles.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: counter-based random streams, vectors, finite differences, Adam
//! - [`energy`]: parametric energy families and closed-form Gaussian divergences
//! - [`samplers`]: Langevin / MALA / annealed Langevin chains and a replay buffer
//! - [`estimators`]: CD/PCD, score matching variants, NCE, and kernel Stein discrepancy
//! - [`experiments`]: config-driven runs writing CSV artifacts, and the check suite

// Index loops mirror the math; `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod numerics;
pub mod samplers;

pub use energy::{
    energy, grad_theta_energy, hvp_x, laplacian_x, score, EnergyFamily, FamilyKind, GaussianDensity, ParamBlock,
    ParamVector,
};
pub use error::{EbmError, Result};
pub use estimators::{HessianSign, LossReport, NceConfig, Projection, SliceConfig};
pub use numerics::{OptimizerConfig, OptimizerState, RealVector, RngStream};
