use std::ops::{Deref, DerefMut};

use crate::error::{EbmError, Result};

/// A dense real vector whose entries are finite at construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    /// Builds a vector, rejecting empty input and NaN/Inf entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(EbmError::InvalidDimension("vector must have dim >= 1".into()));
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(EbmError::NonFinite { context: "vector construction".into(), index: i });
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    /// Wraps entries without the finiteness check. Used on internal hot paths
    /// where the producer already guarantees finiteness or the caller checks.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &[f64]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for RealVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for RealVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_empty() {
        assert!(RealVector::new(vec![]).is_err());
        assert!(matches!(RealVector::new(vec![1.0, f64::NAN]), Err(EbmError::NonFinite { index: 1, .. })));
        assert!(RealVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn arithmetic() {
        let a = RealVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.add(&[1.0, 1.0]).as_slice(), &[4.0, 5.0]);
        assert_eq!(a.scaled(0.5).as_slice(), &[1.5, 2.0]);
    }
}
