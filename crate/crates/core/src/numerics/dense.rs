//! Dense (affine) layer with manual backward pass.

use serde::{Deserialize, Serialize};

use super::matrix::{glorot_init, Matrix};
use crate::error::Result;

/// y = W x + b with W out_dim x in_dim and b a column vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, seed: u64) -> Result<DenseLayer> {
        Ok(DenseLayer {
            weight: glorot_init(out_dim, in_dim, seed)?,
            bias: Matrix::zeros(out_dim, 1),
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> DenseLayer {
        DenseLayer {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: Matrix::zeros(out_dim, 1),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weight.matvec(x);
        for (v, b) in y.iter_mut().zip(self.bias.data()) {
            *v += b;
        }
        y
    }

    /// Accumulates parameter gradients for dL/dy = `dy` at input `x` and
    /// returns dL/dx.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut DenseGrads) -> Vec<f64> {
        grads.weight.add_outer(dy, x, 1.0);
        for (g, d) in grads.bias.data_mut().iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; x.len()];
        self.weight.matvec_transpose_add(dy, &mut dx);
        dx
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            weight: Matrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: Matrix::zeros(self.bias.rows(), 1),
        }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
