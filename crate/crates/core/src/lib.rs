//! Class-imbalanced semi-supervised node classification over a unified
//! structural + semantic message-passing network.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! filesystem, the clock or the command line lives in the `unignn` companion
//! crate.
//!
//! Module map:
//!
//! - [`graph`]: dense and compressed-sparse-row matrices, self loops,
//!   symmetric normalization, sparse-dense products.
//! - [`connectivity`]: hop-distance structural adjacency, k-means, and the
//!   implicit cluster-clique semantic adjacency.
//! - [`diff`]: a reverse-mode tape over dense matrices, losses, Adam, and a
//!   finite-difference gradient checker.
//! - [`gradcheck`]: finite-difference checks of every op and of the full
//!   training objective.
//! - [`model`]: encoder layers, the balanced classifier, the GCN baseline and
//!   the parameter checkpoint codec.
//! - [`pseudolabel`]: per-class quotas and confident top-k selection.
//! - [`trainer`]: the end-to-end training loop with early stopping.
//! - [`data`]: datasets and imbalanced split construction.
//! - [`metrics`]: balanced accuracy, macro-F1 and G-Means.
//! - [`synthetic`]: seeded graph generators for tests and demos.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod connectivity;
pub mod data;
pub mod diff;
mod error;
pub mod gradcheck;
pub mod graph;
pub(crate) mod math;
pub mod metrics;
pub mod model;
pub mod pseudolabel;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use graph::{CsrMatrix, DenseMatrix};
