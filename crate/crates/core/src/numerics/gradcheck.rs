//! Central-difference gradient checking.
//!
//! The loss is presented as a pure function of an ordered parameter list, so
//! the same harness checks a lone dense layer or a full model graph. The
//! per-entry relative error is |analytic - numeric| / max(|analytic| +
//! |numeric|, 1), which behaves like absolute error for small gradients and
//! relative error for large ones.

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1.0)
}

/// Checks `analytic` gradients of `loss` at `params` against central finite
/// differences with step `eps`, over every entry of every matrix. Returns
/// the worst relative error.
pub fn grad_check<F>(loss: F, params: &[Matrix], analytic: &[Matrix], eps: f64) -> Result<f64>
where
    F: Fn(&[Matrix]) -> Result<f64>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!(
            "gradient check step {} outside [1e-7, 1e-3]",
            eps
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} parameter matrices vs {} gradient matrices",
            params.len(),
            analytic.len()
        )));
    }
    let mut worst = 0.0f64;
    let mut point: Vec<Matrix> = params.to_vec();
    for idx in 0..params.len() {
        if params[idx].rows() != analytic[idx].rows() || params[idx].cols() != analytic[idx].cols()
        {
            return Err(Error::Shape(format!(
                "gradient matrix {} shape mismatch",
                idx
            )));
        }
        for entry in 0..params[idx].len() {
            let original = point[idx].data()[entry];
            point[idx].data_mut()[entry] = original + eps;
            let plus = loss(&point)?;
            point[idx].data_mut()[entry] = original - eps;
            let minus = loss(&point)?;
            point[idx].data_mut()[entry] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing matrix {} entry {}",
                    idx, entry
                )));
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let err = relative_error(analytic[idx].data()[entry], numeric);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dense::DenseLayer;
    use crate::numerics::loss::softmax_cross_entropy;
    use crate::numerics::lstm::LstmCellParams;
    use crate::numerics::matrix::glorot_init;

    fn dense_from_params(params: &[Matrix]) -> DenseLayer {
        DenseLayer {
            weight: params[0].clone(),
            bias: params[1].clone(),
        }
    }

    #[test]
    fn dense_softmax_ce_gradients_within_1e6() {
        for seed in 0..20u64 {
            let layer = DenseLayer::new(4, 3, seed).unwrap();
            let x = glorot_init(4, 1, seed + 100).unwrap().data().to_vec();
            let gold = (seed % 3) as usize;

            let logits = layer.forward(&x);
            let (_, dlogits, _) = softmax_cross_entropy(&logits, gold).unwrap();
            let mut grads = layer.zero_grads();
            let dx = layer.backward(&x, &dlogits, &mut grads);

            // parameters plus the input itself
            let params = vec![layer.weight.clone(), layer.bias.clone(), Matrix::column(&x)];
            let analytic = vec![grads.weight, grads.bias, Matrix::column(&dx)];
            let worst = grad_check(
                |p| {
                    let layer = dense_from_params(p);
                    let logits = layer.forward(p[2].data());
                    Ok(softmax_cross_entropy(&logits, gold).unwrap().0)
                },
                &params,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(worst <= 1e-6, "seed {} worst {}", seed, worst);
        }
    }

    #[test]
    fn lstm_cell_gradients_within_1e4() {
        for seed in 0..20u64 {
            let cell = LstmCellParams::new(5, 4, seed).unwrap();
            let inputs: Vec<Vec<f64>> = (0..3)
                .map(|t| glorot_init(5, 1, seed * 31 + t).unwrap().data().to_vec())
                .collect();
            // loss = sum of all hidden outputs, a simple differentiable readout
            let (outputs, caches) = cell.forward(&inputs);
            let dh: Vec<Vec<f64>> = outputs.iter().map(|o| vec![1.0; o.len()]).collect();
            let mut grads = cell.zero_grads();
            let dx = cell.backward(&caches, &dh, &mut grads);

            let mut params: Vec<Matrix> = Vec::new();
            let mut analytic: Vec<Matrix> = Vec::new();
            for gate in 0..4 {
                params.push(cell.w[gate].clone());
                analytic.push(grads.w[gate].clone());
                params.push(cell.u[gate].clone());
                analytic.push(grads.u[gate].clone());
                params.push(cell.b[gate].clone());
                analytic.push(grads.b[gate].clone());
            }
            for (t, x) in inputs.iter().enumerate() {
                params.push(Matrix::column(x));
                analytic.push(Matrix::column(&dx[t]));
            }

            let input_dim = 5;
            let hidden = 4;
            let worst = grad_check(
                |p| {
                    let mut cell = LstmCellParams::zeros(input_dim, hidden);
                    for gate in 0..4 {
                        cell.w[gate] = p[gate * 3].clone();
                        cell.u[gate] = p[gate * 3 + 1].clone();
                        cell.b[gate] = p[gate * 3 + 2].clone();
                    }
                    let xs: Vec<Vec<f64>> =
                        (0..3).map(|t| p[12 + t].data().to_vec()).collect();
                    let (outputs, _) = cell.forward(&xs);
                    Ok(outputs.iter().flatten().sum())
                },
                &params,
                &analytic,
                1e-5,
            )
            .unwrap();
            assert!(worst <= 1e-4, "seed {} worst {}", seed, worst);
        }
    }

    #[test]
    fn eps_outside_range_rejected() {
        let r = grad_check(|_| Ok(0.0), &[], &[], 1e-2);
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
