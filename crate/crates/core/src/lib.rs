//! Multimodal spoken language understanding at desk scale.
//!
//! The crate bundles everything needed to train and evaluate a two-level
//! hierarchical joint intent/slot model over token embeddings with optional
//! utterance-level acoustic and visual feature fusion: a small dense numeric
//! core with manual backpropagation, embedding-table loading, an
//! MFCC-functional acoustic extractor, visual descriptor pooling, corpus
//! tooling with a synthetic generator, and classification metrics.

pub mod acoustic;
pub mod data;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod generator;
pub mod model;
pub mod numerics;
pub mod schema;
pub mod sidecar;
pub mod visual;

pub use error::{Error, Result};
