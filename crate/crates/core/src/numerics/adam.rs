//! Adam optimizer over an ordered list of parameter matrices.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators aligned with a fixed parameter order.
#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    t: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamState {
    pub fn new(cfg: AdamConfig, params: &[&Matrix]) -> AdamState {
        AdamState {
            cfg,
            t: 0,
            m: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect(),
        }
    }

    pub fn timestep(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update; `params` and `grads` must follow the order
    /// the state was built with.
    pub fn step(&mut self, params: &mut [&mut Matrix], grads: &[&Matrix]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam step with {} params / {} grads against state of {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        for ((p, g), (m, v)) in params
            .iter()
            .zip(grads)
            .zip(self.m.iter().zip(&self.v))
        {
            if p.rows() != g.rows()
                || p.cols() != g.cols()
                || p.rows() != m.rows()
                || p.cols() != m.cols()
                || v.rows() != p.rows()
            {
                return Err(Error::Shape(
                    "adam parameter/gradient/state shape mismatch".into(),
                ));
            }
        }
        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = param.data_mut();
            for (((p, &g), m), v) in pd
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}
