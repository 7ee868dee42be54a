//! Deterministic dense numeric core: matrices, layers with manual backward
//! passes, Adam, and finite-difference gradient checking. Everything is f64
//! and pure; mutation happens only through returned values or explicit
//! `&mut` gradient sinks.

pub mod adam;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod matrix;

pub use adam::{AdamConfig, AdamState};
pub use dense::{DenseGrads, DenseLayer};
pub use gradcheck::{grad_check, relative_error};
pub use loss::{cross_entropy, softmax, softmax_cross_entropy};
pub use lstm::{BiLstm, BiLstmGrads, LstmCellGrads, LstmCellParams};
pub use matrix::{glorot_init, Matrix};
