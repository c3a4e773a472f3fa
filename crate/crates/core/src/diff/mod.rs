//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records operations in execution order; [`Tape::backward`]
//! replays them in reverse. The op set is exactly what the network needs:
//! products, fixed sparse or cluster propagation, concatenation, ReLU,
//! inverted dropout, row bias, and fused softmax cross-entropy losses.

mod adam;
pub mod fd;
mod tape;

pub use adam::{adam_step, AdamConfig, Parameter};
pub use tape::{dropout_sparse, Tape, Var};
