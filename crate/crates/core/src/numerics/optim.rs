use super::RealVector;
use crate::energy::ParamVector;
use crate::error::{EbmError, Result};

/// Adam hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-2, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moments plus hyper-parameters. Immutable: every update returns a new
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first_moment: RealVector,
    pub second_moment: RealVector,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(dim: usize, cfg: OptimizerConfig) -> Self {
        Self {
            first_moment: RealVector::zeros(dim),
            second_moment: RealVector::zeros(dim),
            step_count: 0,
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
        }
    }

    /// Same state with a different learning rate (used by schedules).
    pub fn with_learning_rate(&self, lr: f64) -> Self {
        Self { learning_rate: lr, ..self.clone() }
    }

    /// One bias-corrected Adam update of `params` against `grad`, minimizing.
    pub fn update(&self, params: &[f64], grad: &[f64]) -> Result<(Self, Vec<f64>)> {
        let n = self.first_moment.dim();
        if params.len() != n || grad.len() != n {
            return Err(EbmError::invalid(format!(
                "optimizer expects {n} parameters, got params {} / gradient {}",
                params.len(),
                grad.len()
            )));
        }
        let t = self.step_count + 1;
        let c1 = 1.0 - self.beta1.powf(t as f64);
        let c2 = 1.0 - self.beta2.powf(t as f64);
        let mut m = self.first_moment.clone();
        let mut v = self.second_moment.clone();
        let mut out = params.to_vec();
        for i in 0..n {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            out[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        let next = Self { first_moment: m, second_moment: v, step_count: t, ..self.clone() };
        Ok((next, out))
    }
}

pub fn optimizer_step(
    state: &OptimizerState,
    params: &ParamVector,
    gradient: &RealVector,
) -> Result<(OptimizerState, ParamVector)> {
    let (next, values) = state.update(params.values(), gradient)?;
    Ok((next, params.with_values(values)?))
}
