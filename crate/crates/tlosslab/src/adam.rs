//! Adam optimizer with bias correction, over flat parameter slices.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Shared step-size and moment hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::Config(format!("lr must be non-negative, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !b.is_finite() || !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !self.eps.is_finite() || self.eps <= 0.0 {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// First/second moment estimates for one flat parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Steps taken so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
    pub fn step(&mut self, params: &AdamParams, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        params.validate()?;
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} parameters but got {} values and {} gradients",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Domain(format!("gradient entry {bad} is not finite")));
        }
        self.t += 1;
        let bc1 = 1.0 - params.beta1.powi(self.t as i32);
        let bc2 = 1.0 - params.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = params.beta1 * self.m[i] + (1.0 - params.beta1) * g;
            self.v[i] = params.beta2 * self.v[i] + (1.0 - params.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= params.lr * m_hat / (v_hat.sqrt() + params.eps);
        }
        Ok(())
    }
}
