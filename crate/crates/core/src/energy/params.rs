use crate::error::{EbmError, Result};
use crate::numerics::RealVector;

/// One named, contiguous slice of a parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

pub(crate) const LOG_Z: &str = "log_z";

/// Flat parameter vector plus its block layout.
///
/// Scale-like parameters are stored in log-space by the owning family, so
/// every finite vector is a valid parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: RealVector,
    layout: Vec<ParamBlock>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Vec<ParamBlock>) -> Result<Self> {
        let mut next = 0;
        for b in &layout {
            if b.offset != next || b.len == 0 {
                return Err(EbmError::invalid(format!(
                    "parameter block `{}` breaks contiguity at offset {}",
                    b.name, b.offset
                )));
            }
            next += b.len;
        }
        if next != values.len() {
            return Err(EbmError::invalid(format!("layout covers {next} entries but {} values given", values.len())));
        }
        Ok(Self { values: RealVector::new(values)?, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn as_vector(&self) -> &RealVector {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.values.dim() == 0
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.iter().find(|b| b.name == name).map(|b| &self.values[b.offset..b.offset + b.len])
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(EbmError::invalid(format!("expected {} parameter values, got {}", self.len(), values.len())));
        }
        Ok(Self { values: RealVector::new(values)?, layout: self.layout.clone() })
    }

    /// Column-friendly names, one per scalar: `name` for length-1 blocks,
    /// `name[i]` otherwise.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        for b in &self.layout {
            if b.len == 1 {
                out.push(b.name.clone());
            } else {
                out.extend((0..b.len).map(|i| format!("{}[{i}]", b.name)));
            }
        }
        out
    }

    /// Appends a learnable log-partition block.
    pub fn with_log_z(&self, log_z: f64) -> Result<Self> {
        if self.block(LOG_Z).is_some() {
            return Err(EbmError::invalid("parameter vector already carries log_z"));
        }
        let mut values = self.values.to_vec();
        values.push(log_z);
        let mut layout = self.layout.clone();
        layout.push(ParamBlock { name: LOG_Z.into(), offset: self.len(), len: 1 });
        Self::new(values, layout)
    }

    /// Splits off a trailing log_z block if present.
    pub fn split_log_z(&self) -> (ParamVector, Option<f64>) {
        match self.layout.last() {
            Some(b) if b.name == LOG_Z => {
                let n = self.len() - 1;
                let theta = Self {
                    values: RealVector::from_raw(self.values[..n].to_vec()),
                    layout: self.layout[..self.layout.len() - 1].to_vec(),
                };
                (theta, Some(self.values[n]))
            }
            _ => (self.clone(), None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Vec<ParamBlock> {
        vec![ParamBlock { name: "mu".into(), offset: 0, len: 2 }, ParamBlock { name: "s".into(), offset: 2, len: 1 }]
    }

    #[test]
    fn contiguity_enforced() {
        assert!(ParamVector::new(vec![0.0; 3], layout()).is_ok());
        assert!(ParamVector::new(vec![0.0; 4], layout()).is_err());
        let mut bad = layout();
        bad[1].offset = 3;
        assert!(ParamVector::new(vec![0.0; 4], bad).is_err());
    }

    #[test]
    fn names_and_log_z_roundtrip() {
        let p = ParamVector::new(vec![1.0, 2.0, 3.0], layout()).unwrap();
        assert_eq!(p.names(), vec!["mu[0]", "mu[1]", "s"]);
        let q = p.with_log_z(0.5).unwrap();
        assert_eq!(q.block("log_z"), Some(&[0.5][..]));
        let (back, c) = q.split_log_z();
        assert_eq!(back, p);
        assert_eq!(c, Some(0.5));
        assert_eq!(p.split_log_z().1, None);
    }
}
