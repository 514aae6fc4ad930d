use crate::error::{EbmError, Result};
use crate::numerics::{RealVector, RngStream};

/// Over-dispersed fresh start: `N(0, 4·I)`.
pub fn fresh_init(rng: &mut RngStream, dim: usize) -> RealVector {
    let mut z = vec![0.0; dim];
    rng.fill_normal(&mut z);
    for v in &mut z {
        *v *= 2.0;
    }
    RealVector::from_raw(z)
}

/// Store of past chain states used to initialize persistent chains.
///
/// Once full, each push evicts one stored item chosen uniformly at random
/// (possibly the one just pushed).
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    reinit_prob: f64,
    items: Vec<(u64, RealVector)>,
    pushes: u64,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 10_000;
    pub const DEFAULT_REINIT_PROB: f64 = 0.05;

    pub fn new(capacity: usize, reinit_prob: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(EbmError::invalid("replay buffer capacity must be positive"));
        }
        if !(0.0..=1.0).contains(&reinit_prob) {
            return Err(EbmError::invalid("reinit probability must lie in [0, 1]"));
        }
        Ok(Self { capacity, reinit_prob, items: Vec::new(), pushes: 0 })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> impl Iterator<Item = &RealVector> {
        self.items.iter().map(|(_, x)| x)
    }

    /// Push order (0-based) of each stored item.
    pub fn insertion_indices(&self) -> Vec<u64> {
        self.items.iter().map(|(i, _)| *i).collect()
    }

    /// A chain start: fresh with probability ρ (always when empty), else a
    /// uniformly chosen stored state.
    pub fn init_sample<F>(&self, rng: &mut RngStream, fresh: F) -> RealVector
    where
        F: FnOnce(&mut RngStream) -> RealVector,
    {
        if self.items.is_empty() || rng.uniform() < self.reinit_prob {
            return fresh(rng);
        }
        self.items[rng.index(self.items.len())].1.clone()
    }

    pub fn push(&mut self, x: RealVector, rng: &mut RngStream) -> Result<()> {
        if let Some((_, first)) = self.items.first() {
            if first.dim() != x.dim() {
                return Err(EbmError::invalid(format!("buffer holds dim {} states, got dim {}", first.dim(), x.dim())));
            }
        }
        self.items.push((self.pushes, x));
        self.pushes += 1;
        if self.items.len() > self.capacity {
            let victim = rng.index(self.items.len());
            self.items.swap_remove(victim);
        }
        Ok(())
    }
}
