//! Adam optimizer over flattened parameter vectors.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// beta1 = 0.5 is the usual choice for adversarial training.
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators plus the step counter. The step counter
/// increments by exactly one per call to [`AdamState::step`].
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, param_count: usize) -> Self {
        AdamState {
            cfg,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction:
    /// `m <- b1*m + (1-b1)*g`, `v <- b2*v + (1-b2)*g^2`,
    /// `p <- p - lr * mhat / (sqrt(vhat) + eps)`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "adam state holds {} parameters, got params={} grads={}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.cfg.beta1.powi(t);
        let c2 = 1.0 - self.cfg.beta2.powi(t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.cfg.beta1 * *m + (1.0 - self.cfg.beta1) * g;
            *v = self.cfg.beta2 * *v + (1.0 - self.cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
        Ok(())
    }
}
