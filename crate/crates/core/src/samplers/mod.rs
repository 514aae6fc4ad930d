//! Score-based MCMC: unadjusted and Metropolis-adjusted Langevin, annealed
//! Langevin over a noise schedule, and the persistent-chain replay buffer.

mod buffer;
mod langevin;

pub use buffer::{fresh_init, ReplayBuffer};
pub use langevin::{
    annealed_langevin, langevin_chain, mala_log_accept_ratio, run_chains, AnnealedOutput, ChainOutput, FnTarget,
    LangevinConfig, LangevinTarget, ModelTarget, NoiseSchedule,
};
