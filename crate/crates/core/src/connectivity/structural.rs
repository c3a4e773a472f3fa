use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::CsrMatrix;

/// Hop-distance adjacency: entry `(i, j)` is `1/SPD(i, j)` when the shortest
/// path is at most `alpha` edges, zero otherwise. The diagonal is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralAdjacency {
    pub matrix: CsrMatrix,
    pub alpha: usize,
}

impl StructuralAdjacency {
    /// `D̂^{-1/2} (A + I) D̂^{-1/2}`, the propagation operator of the
    /// structural encoder.
    pub fn normalized(&self) -> Result<CsrMatrix> {
        self.matrix.add_self_loops(1.0)?.sym_normalize()
    }
}

/// Runs a BFS truncated at depth `alpha` from every node. Any stored non-zero
/// entry counts as one unweighted edge; stored diagonal entries are ignored.
pub fn build_structural(graph: &CsrMatrix, alpha: usize) -> Result<StructuralAdjacency> {
    if alpha == 0 {
        return Err(Error::InvalidParameter(format!("alpha must be at least 1, got {alpha}")));
    }
    if graph.num_rows() != graph.num_cols() {
        return Err(Error::NotSquare { rows: graph.num_rows(), cols: graph.num_cols() });
    }
    if !graph.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = graph.num_rows();

    let mut depth = vec![u32::MAX; n];
    let mut frontier: Vec<usize> = Vec::new();
    let mut next: Vec<usize> = Vec::new();
    let mut reached: Vec<usize> = Vec::new();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    row_offsets.push(0);

    for source in 0..n {
        depth[source] = 0;
        reached.push(source);
        frontier.clear();
        frontier.push(source);
        for d in 1..=alpha as u32 {
            next.clear();
            for &u in &frontier {
                let (cols, vals) = graph.row(u);
                for (&v, &w) in cols.iter().zip(vals) {
                    if w != 0.0 && depth[v] == u32::MAX {
                        depth[v] = d;
                        reached.push(v);
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            core::mem::swap(&mut frontier, &mut next);
        }

        reached.sort_unstable();
        for &v in &reached {
            if v != source {
                col_indices.push(v);
                values.push(1.0 / depth[v] as f64);
            }
            depth[v] = u32::MAX;
        }
        reached.clear();
        row_offsets.push(col_indices.len());
    }

    let matrix = CsrMatrix::from_parts(n, n, row_offsets, col_indices, values)?;
    Ok(StructuralAdjacency { matrix, alpha })
}
