//! LSTM cell and bidirectional wrapper with manual backpropagation through
//! time. Gate order everywhere is input, forget, output, candidate.

use serde::{Deserialize, Serialize};

use super::matrix::{glorot_init, Matrix};
use crate::error::{Error, Result};

pub const GATE_INPUT: usize = 0;
pub const GATE_FORGET: usize = 1;
pub const GATE_OUTPUT: usize = 2;
pub const GATE_CAND: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    input_dim: usize,
    hidden_dim: usize,
    /// Input weights, hidden_dim x input_dim per gate.
    pub w: [Matrix; 4],
    /// Recurrent weights, hidden_dim x hidden_dim per gate.
    pub u: [Matrix; 4],
    /// Biases as column vectors.
    pub b: [Matrix; 4],
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCellParams {
    /// Glorot weights, zero biases except the forget gate bias at 1.0.
    pub fn new(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<LstmCellParams> {
        let mut w = Vec::with_capacity(4);
        let mut u = Vec::with_capacity(4);
        let mut b = Vec::with_capacity(4);
        for gate in 0..4 {
            w.push(glorot_init(hidden_dim, input_dim, seed ^ (0x10 + gate as u64))?);
            u.push(glorot_init(hidden_dim, hidden_dim, seed ^ (0x20 + gate as u64))?);
            let mut bias = Matrix::zeros(hidden_dim, 1);
            if gate == GATE_FORGET {
                bias.fill(1.0);
            }
            b.push(bias);
        }
        Ok(LstmCellParams {
            input_dim,
            hidden_dim,
            w: w.try_into().unwrap(),
            u: u.try_into().unwrap(),
            b: b.try_into().unwrap(),
        })
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> LstmCellParams {
        LstmCellParams {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| Matrix::zeros(hidden_dim, input_dim)),
            u: std::array::from_fn(|_| Matrix::zeros(hidden_dim, hidden_dim)),
            b: std::array::from_fn(|_| Matrix::zeros(hidden_dim, 1)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn param_count(&self) -> usize {
        4 * (self.hidden_dim * self.input_dim + self.hidden_dim * self.hidden_dim + self.hidden_dim)
    }

    /// One step: returns (h, c, cache).
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, LstmStepCache) {
        let h = self.hidden_dim;
        let mut gates: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
        for gate in 0..4 {
            let mut pre = self.w[gate].matvec(x);
            let rec = self.u[gate].matvec(h_prev);
            for ((p, r), bias) in pre.iter_mut().zip(&rec).zip(self.b[gate].data()) {
                *p += r + bias;
            }
            gates[gate] = if gate == GATE_CAND {
                pre.into_iter().map(f64::tanh).collect()
            } else {
                pre.into_iter().map(sigmoid).collect()
            };
        }
        let mut c = vec![0.0; h];
        for k in 0..h {
            c[k] = gates[GATE_FORGET][k] * c_prev[k] + gates[GATE_INPUT][k] * gates[GATE_CAND][k];
        }
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_out: Vec<f64> = (0..h).map(|k| gates[GATE_OUTPUT][k] * tanh_c[k]).collect();
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        };
        (h_out, c, cache)
    }

    /// Forward over a sequence from zero initial state.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<LstmStepCache>) {
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for x in inputs {
            let (h_new, c_new, cache) = self.step(x, &h, &c);
            outputs.push(h_new.clone());
            caches.push(cache);
            h = h_new;
            c = c_new;
        }
        (outputs, caches)
    }

    /// Backpropagation through time. `dh_seq[t]` is dL/dh_t from above.
    /// Returns dL/dx per step. Parameter gradients accumulate into `grads`.
    pub fn backward(
        &self,
        caches: &[LstmStepCache],
        dh_seq: &[Vec<f64>],
        grads: &mut LstmCellGrads,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden_dim;
        let mut dx_seq = vec![vec![0.0; self.input_dim]; caches.len()];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..caches.len()).rev() {
            let cache = &caches[t];
            let gi = &cache.gates[GATE_INPUT];
            let gf = &cache.gates[GATE_FORGET];
            let go = &cache.gates[GATE_OUTPUT];
            let gg = &cache.gates[GATE_CAND];

            let mut dh = dh_seq[t].clone();
            for (d, n) in dh.iter_mut().zip(&dh_next) {
                *d += n;
            }

            let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h]);
            let mut dc_prev = vec![0.0; h];
            for k in 0..h {
                let dc = dc_next[k] + dh[k] * go[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
                let d_o = dh[k] * cache.tanh_c[k];
                let d_f = dc * cache.c_prev[k];
                let d_i = dc * gg[k];
                let d_g = dc * gi[k];
                da[GATE_OUTPUT][k] = d_o * go[k] * (1.0 - go[k]);
                da[GATE_FORGET][k] = d_f * gf[k] * (1.0 - gf[k]);
                da[GATE_INPUT][k] = d_i * gi[k] * (1.0 - gi[k]);
                da[GATE_CAND][k] = d_g * (1.0 - gg[k] * gg[k]);
                dc_prev[k] = dc * gf[k];
            }

            let mut dh_prev = vec![0.0; h];
            for gate in 0..4 {
                grads.w[gate].add_outer(&da[gate], &cache.x, 1.0);
                grads.u[gate].add_outer(&da[gate], &cache.h_prev, 1.0);
                for (g, d) in grads.b[gate].data_mut().iter_mut().zip(&da[gate]) {
                    *g += d;
                }
                self.w[gate].matvec_transpose_add(&da[gate], &mut dx_seq[t]);
                self.u[gate].matvec_transpose_add(&da[gate], &mut dh_prev);
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dx_seq
    }

    pub fn zero_grads(&self) -> LstmCellGrads {
        LstmCellGrads {
            w: std::array::from_fn(|_| Matrix::zeros(self.hidden_dim, self.input_dim)),
            u: std::array::from_fn(|_| Matrix::zeros(self.hidden_dim, self.hidden_dim)),
            b: std::array::from_fn(|_| Matrix::zeros(self.hidden_dim, 1)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gate values.
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCellGrads {
    pub w: [Matrix; 4],
    pub u: [Matrix; 4],
    pub b: [Matrix; 4],
}

/// Bidirectional LSTM: output at position t is [fwd h_t || bwd h_t] where
/// the backward cell consumes the sequence in reverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
}

#[derive(Debug)]
pub struct BiLstmCache {
    fwd: Vec<LstmStepCache>,
    /// Caches in processing order of the reversed sequence.
    bwd: Vec<LstmStepCache>,
}

impl BiLstm {
    pub fn new(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<BiLstm> {
        Ok(BiLstm {
            fwd: LstmCellParams::new(input_dim, hidden_dim, seed)?,
            bwd: LstmCellParams::new(input_dim, hidden_dim, seed ^ 0x5bd1e995)?,
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.fwd.hidden_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.fwd.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden_dim()
    }

    fn check_inputs(&self, inputs: &[Vec<f64>]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("BiLSTM forward on empty sequence".into()));
        }
        for (t, x) in inputs.iter().enumerate() {
            if x.len() != self.fwd.input_dim() {
                return Err(Error::Shape(format!(
                    "BiLSTM input at position {} has dim {}, expected {}",
                    t,
                    x.len(),
                    self.fwd.input_dim()
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_cached(inputs)?.0)
    }

    pub fn forward_cached(&self, inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, BiLstmCache)> {
        self.check_inputs(inputs)?;
        let (fwd_out, fwd_cache) = self.fwd.forward(inputs);
        let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
        let (bwd_out, bwd_cache) = self.bwd.forward(&reversed);
        let n = inputs.len();
        let mut outputs = Vec::with_capacity(n);
        for t in 0..n {
            let mut v = fwd_out[t].clone();
            v.extend_from_slice(&bwd_out[n - 1 - t]);
            outputs.push(v);
        }
        Ok((
            outputs,
            BiLstmCache {
                fwd: fwd_cache,
                bwd: bwd_cache,
            },
        ))
    }

    /// `doutputs[t]` is dL/d(output at t), length 2H. Returns dL/dx per
    /// position; parameter gradients accumulate into `grads`.
    pub fn backward(
        &self,
        cache: &BiLstmCache,
        doutputs: &[Vec<f64>],
        grads: &mut BiLstmGrads,
    ) -> Vec<Vec<f64>> {
        let h = self.fwd.hidden_dim();
        let n = doutputs.len();
        let dh_fwd: Vec<Vec<f64>> = doutputs.iter().map(|d| d[..h].to_vec()).collect();
        // Backward-cell gradients arrive indexed by original position; remap
        // to the reversed processing order.
        let dh_bwd: Vec<Vec<f64>> = (0..n).map(|s| doutputs[n - 1 - s][h..].to_vec()).collect();
        let dx_fwd = self.fwd.backward(&cache.fwd, &dh_fwd, &mut grads.fwd);
        let dx_bwd_rev = self.bwd.backward(&cache.bwd, &dh_bwd, &mut grads.bwd);
        let mut dx = dx_fwd;
        for t in 0..n {
            for (a, b) in dx[t].iter_mut().zip(&dx_bwd_rev[n - 1 - t]) {
                *a += b;
            }
        }
        dx
    }

    pub fn zero_grads(&self) -> BiLstmGrads {
        BiLstmGrads {
            fwd: self.fwd.zero_grads(),
            bwd: self.bwd.zero_grads(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.fwd.param_count() + self.bwd.param_count()
    }
}

#[derive(Debug, Clone)]
pub struct BiLstmGrads {
    pub fwd: LstmCellGrads,
    pub bwd: LstmCellGrads,
}
