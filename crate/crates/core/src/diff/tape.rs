use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::connectivity::SemanticAdjacency;
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, DenseMatrix};
use crate::math;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<'a> {
    Leaf,
    MatMul(Var, Var),
    /// Constant sparse left operand times a variable.
    SparseMatMul { lhs: Cow<'a, CsrMatrix>, rhs: Var },
    Propagate { adj: &'a CsrMatrix, x: Var },
    SemanticPropagate { adj: &'a SemanticAdjacency, x: Var },
    ConcatCols(Var, Var),
    Relu(Var),
    Dropout { x: Var, mask: Vec<f64> },
    AddRowBias { x: Var, bias: Var },
    Add(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        targets: Vec<usize>,
        row_weights: Vec<f64>,
        probs: DenseMatrix,
    },
}

struct Node<'a> {
    value: Cow<'a, DenseMatrix>,
    grad: Option<DenseMatrix>,
    op: Op<'a>,
    requires_grad: bool,
}

/// Recording of one forward pass. Leaves may borrow their values, so the tape
/// borrows parameters and adjacencies for `'a`.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, DenseMatrix>, op: Op<'a>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, grad: None, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf borrowing its value.
    pub fn param(&mut self, value: &'a DenseMatrix) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, true)
    }

    pub fn param_owned(&mut self, value: DenseMatrix) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, true)
    }

    pub fn constant(&mut self, value: DenseMatrix) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, value: &'a DenseMatrix) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &DenseMatrix {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient; `None` until a backward pass reaches `v`.
    pub fn grad(&self, v: Var) -> Option<&DenseMatrix> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::MatMul(a, b), rg))
    }

    /// `lhs · rhs` where `lhs` is a constant sparse matrix (input features).
    pub fn sparse_matmul(&mut self, lhs: Cow<'a, CsrMatrix>, rhs: Var) -> Result<Var> {
        let value = sparse_dense(&lhs, self.value(rhs))?;
        let rg = self.needs(rhs);
        Ok(self.push(Cow::Owned(value), Op::SparseMatMul { lhs, rhs }, rg))
    }

    /// `adj · x` for a fixed sparse operator.
    pub fn propagate(&mut self, adj: &'a CsrMatrix, x: Var) -> Result<Var> {
        let value = adj.spmm(self.value(x))?;
        let rg = self.needs(x);
        Ok(self.push(Cow::Owned(value), Op::Propagate { adj, x }, rg))
    }

    /// Normalized cluster-clique propagation (cluster means).
    pub fn semantic_propagate(&mut self, adj: &'a SemanticAdjacency, x: Var) -> Result<Var> {
        let value = adj.propagate(self.value(x))?;
        let rg = self.needs(x);
        Ok(self.push(Cow::Owned(value), Op::SemanticPropagate { adj, x }, rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hcat(self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::ConcatCols(a, b), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = DenseMatrix::from_raw(src.rows(), src.cols(), data);
        let rg = self.needs(x);
        self.push(Cow::Owned(value), Op::Relu(x), rg)
    }

    /// Inverted dropout. Outside training, or with `rate == 0`, returns `x`
    /// itself and draws nothing from `rng`.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        rng: &mut R,
        training: bool,
    ) -> Result<Var> {
        check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep_scale = 1.0 / (1.0 - rate);
        let src = self.value(x);
        let mask: Vec<f64> = (0..src.data().len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep_scale })
            .collect();
        let data = src.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = DenseMatrix::from_raw(src.rows(), src.cols(), data);
        let rg = self.needs(x);
        Ok(self.push(Cow::Owned(value), Op::Dropout { x, mask }, rg))
    }

    /// Adds a `1 × cols` bias to every row.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            return Err(Error::DimensionMismatch {
                op: "add_row_bias",
                detail: format!("bias {:?} for input {:?}", bv.shape(), xv.shape()),
            });
        }
        let mut value = xv.clone();
        for i in 0..value.rows() {
            for (o, b) in value.row_mut(i).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let rg = self.needs(x) || self.needs(bias);
        Ok(self.push(Cow::Owned(value), Op::AddRowBias { x, bias }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        Ok(self.push(Cow::Owned(value), Op::Add(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).scale(factor);
        let rg = self.needs(x);
        self.push(Cow::Owned(value), Op::Scale(x, factor), rg)
    }

    /// Sum of all entries as a 1x1 scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = DenseMatrix::scalar(self.value(x).sum());
        let rg = self.needs(x);
        self.push(Cow::Owned(value), Op::Sum(x), rg)
    }

    /// `Σ_{i ∈ rows} ω_{y_i} · CE(softmax(logits_i), y_i)`, no normalization.
    pub fn weighted_cross_entropy(
        &mut self,
        logits: Var,
        rows: &[usize],
        labels: &[usize],
        class_weights: &[f64],
    ) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::InvalidParameter("weighted cross-entropy over an empty node set".into()));
        }
        if let Some(w) = class_weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!("class weight {w} must be positive")));
        }
        let c = self.value(logits).cols();
        if class_weights.len() != c {
            return Err(Error::DimensionMismatch {
                op: "weighted_cross_entropy",
                detail: format!("{} class weights for {} classes", class_weights.len(), c),
            });
        }
        let weights = labels
            .iter()
            .map(|&y| class_weights.get(y).copied().ok_or(Error::IndexOutOfRange { index: y, bound: c }))
            .collect::<Result<Vec<_>>>()?;
        self.cross_entropy(logits, rows, labels, weights)
    }

    /// `(1/|rows|) · Σ CE(softmax(logits_i), target_i)`. An empty node set
    /// yields an exact zero constant.
    pub fn mean_cross_entropy(&mut self, logits: Var, rows: &[usize], targets: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Ok(self.constant(DenseMatrix::scalar(0.0)));
        }
        let w = 1.0 / rows.len() as f64;
        self.cross_entropy(logits, rows, targets, vec![w; rows.len()])
    }

    fn cross_entropy(
        &mut self,
        logits: Var,
        rows: &[usize],
        targets: &[usize],
        row_weights: Vec<f64>,
    ) -> Result<Var> {
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                op: "cross_entropy",
                detail: format!("{} rows vs {} targets", rows.len(), targets.len()),
            });
        }
        let z = self.value(logits);
        let (n, c) = z.shape();
        let mut probs = DenseMatrix::zeros(rows.len(), c);
        let mut total = 0.0;
        for (k, (&r, &t)) in rows.iter().zip(targets).enumerate() {
            if r >= n {
                return Err(Error::IndexOutOfRange { index: r, bound: n });
            }
            if t >= c {
                return Err(Error::IndexOutOfRange { index: t, bound: c });
            }
            let zr = z.row(r);
            let max = zr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            let p = probs.row_mut(k);
            for (pj, &zj) in p.iter_mut().zip(zr) {
                *pj = math::exp(zj - max);
                s += *pj;
            }
            p.iter_mut().for_each(|v| *v /= s);
            let lse = max + math::ln(s);
            total += row_weights[k] * (lse - zr[t]);
        }
        let rg = self.needs(logits);
        let op = Op::CrossEntropy {
            logits,
            rows: rows.to_vec(),
            targets: targets.to_vec(),
            row_weights,
            probs,
        };
        Ok(self.push(Cow::Owned(DenseMatrix::scalar(total)), op, rg))
    }

    /// Accumulates `d loss / d v` into every trainable leaf. Intermediate
    /// gradients are recomputed from scratch; leaf gradients add up across
    /// calls until [`zero_grads`](Self::zero_grads).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let (rows, cols) = self.value(loss).shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        for n in &mut self.nodes {
            if !matches!(n.op, Op::Leaf) {
                n.grad = None;
            }
        }
        if !self.needs(loss) {
            return Ok(());
        }
        accumulate(&mut self.nodes[loss.0].grad, DenseMatrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if matches!(self.nodes[idx].op, Op::Leaf) || !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].grad.take() else { continue };
            let contributions = self.local_grads(idx, &g)?;
            self.nodes[idx].grad = Some(g);
            for (v, dv) in contributions {
                if self.nodes[v.0].requires_grad {
                    accumulate(&mut self.nodes[v.0].grad, dv);
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, g: &DenseMatrix) -> Result<Vec<(Var, DenseMatrix)>> {
        let node = &self.nodes[idx];
        let mut out = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    out.push((*a, g.matmul_nt(self.value(*b))?));
                }
                if self.needs(*b) {
                    out.push((*b, self.value(*a).matmul_tn(g)?));
                }
            }
            Op::SparseMatMul { lhs, rhs } => out.push((*rhs, lhs.spmm_transpose(g)?)),
            Op::Propagate { adj, x } => out.push((*x, adj.spmm_transpose(g)?)),
            // The cluster-mean operator is a symmetric projection.
            Op::SemanticPropagate { adj, x } => out.push((*x, adj.propagate(g)?)),
            Op::ConcatCols(a, b) => {
                let (ga, gb) = g.split_cols(self.value(*a).cols());
                out.push((*a, ga));
                out.push((*b, gb));
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let data = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .map(|(&gi, &xi)| if xi > 0.0 { gi } else { 0.0 })
                    .collect();
                out.push((*x, DenseMatrix::from_raw(g.rows(), g.cols(), data)));
            }
            Op::Dropout { x, mask } => {
                let data = g.data().iter().zip(mask).map(|(gi, m)| gi * m).collect();
                out.push((*x, DenseMatrix::from_raw(g.rows(), g.cols(), data)));
            }
            Op::AddRowBias { x, bias } => {
                if self.needs(*bias) {
                    let mut gb = DenseMatrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    out.push((*bias, gb));
                }
                out.push((*x, g.clone()));
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Scale(x, factor) => out.push((*x, g.scale(*factor))),
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                out.push((*x, DenseMatrix::filled(r, c, g.data()[0])));
            }
            Op::CrossEntropy { logits, rows, targets, row_weights, probs } => {
                let upstream = g.data()[0];
                let (n, c) = self.value(*logits).shape();
                let mut gl = DenseMatrix::zeros(n, c);
                for (k, (&r, &t)) in rows.iter().zip(targets).enumerate() {
                    let scale = upstream * row_weights[k];
                    let p = probs.row(k);
                    let dst = gl.row_mut(r);
                    for j in 0..c {
                        let onehot = if j == t { 1.0 } else { 0.0 };
                        dst[j] += scale * (p[j] - onehot);
                    }
                }
                out.push((*logits, gl));
            }
        }
        Ok(out)
    }
}

fn accumulate(slot: &mut Option<DenseMatrix>, g: DenseMatrix) {
    match slot {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!("dropout rate {rate} must lie in [0, 1)")));
    }
    Ok(())
}

fn sparse_dense(lhs: &CsrMatrix, rhs: &DenseMatrix) -> Result<DenseMatrix> {
    lhs.spmm(rhs)
}

/// Inverted dropout on the stored entries of a constant sparse matrix.
/// Dropping an implicit zero changes nothing, so only stored entries draw.
pub fn dropout_sparse<R: Rng + ?Sized>(m: &CsrMatrix, rate: f64, rng: &mut R) -> Result<CsrMatrix> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(m.clone());
    }
    let scale = 1.0 / (1.0 - rate);
    let keep: Vec<bool> = (0..m.nnz()).map(|_| rng.gen::<f64>() >= rate).collect();
    let mut k = 0;
    let kept = m.filter(|_, _, _| {
        let keep_it = keep[k];
        k += 1;
        keep_it
    });
    Ok(kept.map_values(|_, _, v| v * scale))
}
