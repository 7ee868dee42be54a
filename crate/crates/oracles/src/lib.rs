//! Brute-force reference computations for tests.
//!
//! Everything here is written the slow, obvious way: O(N^2) DFT instead of
//! FFT, per-class counting loops instead of tallied confusion matrices,
//! per-element pooling loops. Test suites compare the fast implementations
//! in `mmslu-core` against these. This crate must never depend on
//! `mmslu-core`; independence is the point.

pub mod dsp;
pub mod metrics;
pub mod pooling;
