use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::error::{Error, Result};
use crate::math;

/// Compressed sparse-row matrix in canonical form: column indices strictly
/// increase within each row, so there are no duplicate entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    num_rows: usize,
    num_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a canonical matrix from `(row, col, value)` triplets in any
    /// order. Duplicate coordinates are summed.
    pub fn from_triplets<I>(num_rows: usize, num_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (pos, (r, c, v)) in triplets.into_iter().enumerate() {
            if r >= num_rows {
                return Err(Error::IndexOutOfRange { index: r, bound: num_rows });
            }
            if c >= num_cols {
                return Err(Error::IndexOutOfRange { index: c, bound: num_cols });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite { position: pos });
            }
            entries.push((r, c, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_offsets = vec![0usize; num_rows + 1];
        let mut col_indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_indices.push(c);
            values.push(v);
            row_offsets[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..num_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Ok(Self { num_rows, num_cols, row_offsets, col_indices, values })
    }

    /// Validating constructor over raw CSR arrays.
    pub fn from_parts(
        num_rows: usize,
        num_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |detail: &str| Error::DimensionMismatch {
            op: "CsrMatrix::from_parts",
            detail: detail.into(),
        };
        if row_offsets.len() != num_rows + 1 {
            return Err(bad("row_offsets must have num_rows + 1 entries"));
        }
        if row_offsets[0] != 0 || row_offsets[num_rows] != col_indices.len() {
            return Err(bad("row_offsets must start at 0 and end at nnz"));
        }
        if col_indices.len() != values.len() {
            return Err(bad("col_indices and values differ in length"));
        }
        for i in 0..num_rows {
            if row_offsets[i] > row_offsets[i + 1] {
                return Err(bad("row_offsets must be non-decreasing"));
            }
            let cols = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("column indices must strictly increase within a row"));
            }
            if let Some(&c) = cols.iter().find(|&&c| c >= num_cols) {
                return Err(Error::IndexOutOfRange { index: c, bound: num_cols });
            }
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { position });
        }
        Ok(Self { num_rows, num_cols, row_offsets, col_indices, values })
    }

    pub fn zeros(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            row_offsets: vec![0; num_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Keeps the non-zero entries of a dense matrix.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(m.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self { num_rows: m.rows(), num_cols: m.cols(), row_offsets, col_indices, values }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.num_rows, self.num_cols);
        for (i, j, v) in self.iter() {
            out.set(i, j, v);
        }
        out
    }

    #[inline]
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    #[inline]
    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Stored value at `(i, j)`, zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.num_rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Size in bytes of the three backing arrays.
    pub fn heap_bytes(&self) -> usize {
        self.row_offsets.len() * core::mem::size_of::<usize>()
            + self.col_indices.len() * core::mem::size_of::<usize>()
            + self.values.len() * core::mem::size_of::<f64>()
    }

    fn require_square(&self) -> Result<()> {
        if self.num_rows != self.num_cols {
            return Err(Error::NotSquare { rows: self.num_rows, cols: self.num_cols });
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        self.num_rows == self.num_cols && self.iter().all(|(i, j, v)| self.get(j, i) == v)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.num_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.num_cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in order so each transposed row stays sorted.
        for (i, j, v) in self.iter() {
            let slot = next[j];
            col_indices[slot] = i;
            values[slot] = v;
            next[j] += 1;
        }
        Self {
            num_rows: self.num_cols,
            num_cols: self.num_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Returns `a` with every diagonal entry set to `weight`, replacing any
    /// diagonal already present. A zero weight removes the diagonal.
    pub fn add_self_loops(&self, weight: f64) -> Result<Self> {
        self.require_square()?;
        if !weight.is_finite() {
            return Err(Error::InvalidParameter(format!("self-loop weight {weight} is not finite")));
        }
        let n = self.num_rows;
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(self.nnz() + n);
        let mut values = Vec::with_capacity(self.nnz() + n);
        row_offsets.push(0);
        for i in 0..n {
            let (cols, vals) = self.row(i);
            let mut placed = weight == 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    continue;
                }
                if !placed && j > i {
                    col_indices.push(i);
                    values.push(weight);
                    placed = true;
                }
                col_indices.push(j);
                values.push(v);
            }
            if !placed {
                col_indices.push(i);
                values.push(weight);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self { num_rows: n, num_cols: n, row_offsets, col_indices, values })
    }

    /// `D^{-1/2} A D^{-1/2}` with `D` the diagonal of row sums.
    pub fn sym_normalize(&self) -> Result<Self> {
        self.require_square()?;
        let degrees = self.row_sums();
        if let Some((row, &degree)) = degrees.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
            return Err(Error::DegenerateDegree { row, degree });
        }
        let mut out = self.clone();
        for i in 0..self.num_rows {
            let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
            for k in a..b {
                let j = self.col_indices[k];
                out.values[k] = self.values[k] / math::sqrt(degrees[i] * degrees[j]);
            }
        }
        Ok(out)
    }

    /// Sparse × dense product. Each output row accumulates in stored column
    /// order.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.num_cols != x.rows() {
            return Err(Error::DimensionMismatch {
                op: "spmm",
                detail: format!("{}x{} · {:?}", self.num_rows, self.num_cols, x.shape()),
            });
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.num_rows, d);
        for i in 0..self.num_rows {
            let (cols, vals) = self.row(i);
            let o = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (acc, &xv) in o.iter_mut().zip(x.row(j)) {
                    *acc += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · x` without materializing the transpose.
    pub fn spmm_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if self.num_rows != x.rows() {
            return Err(Error::DimensionMismatch {
                op: "spmm_transpose",
                detail: format!("({}x{})ᵀ · {:?}", self.num_rows, self.num_cols, x.shape()),
            });
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.num_cols, d);
        for i in 0..self.num_rows {
            let (cols, vals) = self.row(i);
            let xr = x.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (acc, &xv) in out.row_mut(j).iter_mut().zip(xr) {
                    *acc += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// Same sparsity pattern, values remapped per entry.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.num_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[k] = f(i, self.col_indices[k], self.values[k]);
            }
        }
        out
    }

    /// Drops entries for which `keep` returns false.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Self {
        let mut row_offsets = Vec::with_capacity(self.num_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.num_rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep(i, j, v) {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self { num_rows: self.num_rows, num_cols: self.num_cols, row_offsets, col_indices, values }
    }
}
