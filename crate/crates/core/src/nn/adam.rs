use serde::{Deserialize, Serialize};

use super::{GradientVector, ModelParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay, applied to weights only.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step: u64,
    decay_mask: Vec<bool>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        let n = params.num_params();
        Self {
            config,
            first_moment: vec![0.0; n],
            second_moment: vec![0.0; n],
            step: 0,
            decay_mask: params.weight_mask(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    /// One AdamW update: weights shrink by `lr * weight_decay` first, then
    /// move along the bias-corrected moment ratio.
    pub fn adam_step(&mut self, params: &ModelParams, grad: &GradientVector) -> Result<ModelParams> {
        params.check_len(grad.len(), "adam gradient")?;
        if grad.len() != self.first_moment.len() {
            return Err(Error::Shape {
                context: "optimizer state",
                expected: self.first_moment.len(),
                actual: grad.len(),
            });
        }
        if !grad.is_finite() {
            return Err(Error::NonFinite { origin: grad.origin });
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        let mut theta = params.flatten();
        for k in 0..theta.len() {
            let g = grad.values[k];
            let m = beta1 * self.first_moment[k] + (1.0 - beta1) * g;
            let v = beta2 * self.second_moment[k] + (1.0 - beta2) * g * g;
            self.first_moment[k] = m;
            self.second_moment[k] = v;
            if self.decay_mask[k] && weight_decay != 0.0 {
                theta[k] -= lr * weight_decay * theta[k];
            }
            theta[k] -= lr * (m / c1) / ((v / c2).sqrt() + eps);
        }
        params.unflatten(&theta)
    }
}
