//! Softmax and cross-entropy, plus the fused softmax-CE gradient.

use crate::error::{Error, Result};

const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax via max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    debug_assert!(!logits.is_empty());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// -ln(max(probs[gold], 1e-12)).
pub fn cross_entropy(probs: &[f64], gold: usize) -> Result<f64> {
    if gold >= probs.len() {
        return Err(Error::Shape(format!(
            "gold index {} out of range for {} classes",
            gold,
            probs.len()
        )));
    }
    Ok(-probs[gold].max(PROB_FLOOR).ln())
}

/// Loss and dL/dlogits of softmax followed by cross-entropy against `gold`.
/// The gradient is the closed form probs - onehot(gold).
pub fn softmax_cross_entropy(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let probs = softmax(logits);
    let loss = cross_entropy(&probs, gold)?;
    let mut grad = probs.clone();
    grad[gold] -= 1.0;
    Ok((loss, grad, probs))
}
