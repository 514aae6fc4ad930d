//! Shared numerical plumbing: counter-based random streams, dense vectors,
//! finite-difference oracles and the Adam optimizer.

mod diff;
mod optim;
mod rng;
mod vector;

pub use diff::{finite_diff_gradient, rel_error};
pub use optim::{optimizer_step, OptimizerConfig, OptimizerState};
pub use rng::{gaussian_vector, rademacher_vector, RngStream};
pub use vector::RealVector;
