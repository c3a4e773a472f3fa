//! Matrix primitives shared by every other module.
//!
//! All arithmetic is `f64`. Reductions run in a fixed order (row-major, stored
//! column order for sparse rows) so results are bit-stable across runs.

mod csr;
mod dense;

pub use csr::CsrMatrix;
pub use dense::DenseMatrix;
pub(crate) use dense::argmax;
