use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::ClusterModel;
use crate::error::{Error, Result};
use crate::graph::DenseMatrix;

/// Cluster-clique adjacency kept as assignments and sizes.
///
/// The implied matrix `Â[i, j] = 1` iff `i` and `j` share a cluster
/// (including `i == j`). Every node in cluster `k` has degree `m_k`, so
/// `D̂^{-1/2} Â D̂^{-1/2} X` replaces each row with its cluster mean.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticAdjacency {
    assignments: Vec<usize>,
    cluster_sizes: Vec<usize>,
}

impl SemanticAdjacency {
    pub fn from_clusters(clusters: &ClusterModel) -> Self {
        Self {
            assignments: clusters.assignments.clone(),
            cluster_sizes: clusters.cluster_sizes(),
        }
    }

    /// Clusters may be empty here; they simply never receive a node.
    pub fn from_assignments(assignments: Vec<usize>, num_clusters: usize) -> Result<Self> {
        let mut cluster_sizes = vec![0; num_clusters];
        for &a in &assignments {
            if a >= num_clusters {
                return Err(Error::IndexOutOfRange { index: a, bound: num_clusters });
            }
            cluster_sizes[a] += 1;
        }
        Ok(Self { assignments, cluster_sizes })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn cluster_sizes(&self) -> &[usize] {
        &self.cluster_sizes
    }

    pub fn num_nodes(&self) -> usize {
        self.assignments.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    /// Materializes the implied `Â` (self loops included). `O(N²)`; meant for
    /// checks on small graphs.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.num_nodes();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if self.assignments[i] == self.assignments[j] {
                    m.set(i, j, 1.0);
                }
            }
        }
        m
    }

    pub fn propagate(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        semantic_propagate(self, x)
    }
}

/// Normalized semantic propagation in `O(N · dim)`: each output row is the
/// mean of the input rows in the node's cluster.
pub fn semantic_propagate(adj: &SemanticAdjacency, x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.rows() != adj.num_nodes() {
        return Err(Error::DimensionMismatch {
            op: "semantic_propagate",
            detail: format!("{} nodes vs {} feature rows", adj.num_nodes(), x.rows()),
        });
    }
    let dim = x.cols();
    let mut means = DenseMatrix::zeros(adj.num_clusters(), dim);
    for (i, &k) in adj.assignments.iter().enumerate() {
        for (m, &v) in means.row_mut(k).iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    for (k, &size) in adj.cluster_sizes.iter().enumerate() {
        if size > 0 {
            let inv = 1.0 / size as f64;
            means.row_mut(k).iter_mut().for_each(|v| *v *= inv);
        }
    }
    let mut out = DenseMatrix::zeros(x.rows(), dim);
    for (i, &k) in adj.assignments.iter().enumerate() {
        out.row_mut(i).copy_from_slice(means.row(k));
    }
    Ok(out)
}
