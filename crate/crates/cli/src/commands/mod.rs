//! Subcommand implementations.

pub mod ablate;
pub mod embed_info;
pub mod eval;
pub mod extract_acoustic;
pub mod gen_synth;
pub mod pool_visual;
pub mod train;
pub mod validate;

mod shared;
