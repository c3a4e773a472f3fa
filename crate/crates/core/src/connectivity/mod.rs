//! Structural and semantic connectivity.
//!
//! The structural adjacency links nodes up to `alpha` hops apart with weight
//! `1/hops`. The semantic adjacency links every pair of nodes that share a
//! k-means cluster. It is kept implicit as assignments plus cluster sizes,
//! since normalized propagation over a clique-with-self-loops block is the
//! block mean.

mod kmeans;
mod semantic;
mod structural;

pub use kmeans::{kmeans, kmeans_from, kmeans_with, ClusterModel, KMeansParams, PointSet, SparsePoints};
pub use semantic::{semantic_propagate, SemanticAdjacency};
pub use structural::{build_structural, StructuralAdjacency};
