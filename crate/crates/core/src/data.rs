//! Datasets and class-imbalanced splits.
//!
//! Protocol: every majority class gets 20 training nodes, every minority class
//! `round_half_up(20·ρ)`, and each class contributes 25 validation and 55 test
//! nodes. Within a class, ids are sorted, shuffled with a seeded stream, then
//! cut into train, validation and test in that order.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, DenseMatrix};
use crate::math;

pub const MAJORITY_TRAIN: usize = 20;
pub const VAL_PER_CLASS: usize = 25;
pub const TEST_PER_CLASS: usize = 55;

/// Attributed graph with one label per node.
///
/// Invariants: binary symmetric adjacency with an empty diagonal, `N` feature
/// rows of finite values, labels in `0..C`, `C ≥ 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: DenseMatrix,
    adjacency: CsrMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: DenseMatrix, adjacency: CsrMatrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let n = labels.len();
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 classes, got {num_classes}")));
        }
        if features.rows() != n || adjacency.num_rows() != n || adjacency.num_cols() != n {
            return Err(Error::DimensionMismatch {
                op: "Dataset::new",
                detail: format!(
                    "{n} labels, {} feature rows, {}x{} adjacency",
                    features.rows(),
                    adjacency.num_rows(),
                    adjacency.num_cols()
                ),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::IndexOutOfRange { index: bad, bound: num_classes });
        }
        if !features.is_finite() {
            let pos = features.data().iter().position(|v| !v.is_finite()).unwrap_or(0);
            return Err(Error::NonFinite { position: pos });
        }
        if let Some((i, j, v)) = adjacency.iter().find(|&(i, j, v)| i == j || v != 1.0) {
            return Err(Error::InvalidParameter(format!(
                "adjacency must be binary with empty diagonal, found ({i}, {j}) = {v}"
            )));
        }
        if !adjacency.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok(Self { features, adjacency, labels, num_classes })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self, nodes: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &i in nodes {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut by = vec![Vec::new(); self.num_classes];
        for (i, &y) in self.labels.iter().enumerate() {
            by[y].push(i);
        }
        by
    }

    /// Relabels nodes so that old node `perm[k]` becomes node `k`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let mut inverse = vec![usize::MAX; n];
        for (k, &old) in perm.iter().enumerate() {
            if old >= n || inverse[old] != usize::MAX {
                return Err(Error::InvalidParameter("not a permutation".into()));
            }
            inverse[old] = k;
        }
        if perm.len() != n {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        let features = self.features.select_rows(perm);
        let labels = perm.iter().map(|&old| self.labels[old]).collect();
        let adjacency =
            CsrMatrix::from_triplets(n, n, self.adjacency.iter().map(|(i, j, v)| (inverse[i], inverse[j], v)))?;
        Self::new(features, adjacency, labels, self.num_classes)
    }
}

/// Disjoint train / validation / test node sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Realized ratio `min_c n_c / max_c n_c` over training counts.
    pub rho: f64,
    pub minority: Vec<usize>,
    pub seed: u64,
}

impl SplitSpec {
    /// Checks ranges, disjointness, and that every class has a training node.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let n = dataset.num_nodes();
        let mut seen = BTreeSet::new();
        for (name, set) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &i in set.iter() {
                if i >= n {
                    return Err(Error::InvalidSplit(format!("{name} node {i} outside 0..{n}")));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidSplit(format!("node {i} appears twice ({name})")));
                }
            }
        }
        if let Some(c) = dataset.class_counts(&self.train).iter().position(|&k| k == 0) {
            return Err(Error::InvalidSplit(format!("class {c} has no training node")));
        }
        if let Some(&c) = self.minority.iter().find(|&&c| c >= dataset.num_classes()) {
            return Err(Error::InvalidSplit(format!("minority class {c} outside 0..{}", dataset.num_classes())));
        }
        Ok(())
    }

    pub fn train_counts(&self, dataset: &Dataset) -> Vec<usize> {
        dataset.class_counts(&self.train)
    }

    pub fn test_labels(&self, dataset: &Dataset) -> Vec<usize> {
        self.test.iter().map(|&i| dataset.labels()[i]).collect()
    }

    pub fn val_labels(&self, dataset: &Dataset) -> Vec<usize> {
        self.val.iter().map(|&i| dataset.labels()[i]).collect()
    }
}

/// `round_half_up(20·ρ)`.
pub fn minority_train_count(rho: f64) -> usize {
    math::floor(MAJORITY_TRAIN as f64 * rho + 0.5) as usize
}

/// Minority classes are the `num_minority` highest class indices.
pub fn make_imbalanced_split(dataset: &Dataset, num_minority: usize, rho: f64, seed: u64) -> Result<SplitSpec> {
    let c = dataset.num_classes();
    if num_minority >= c && !(num_minority == c && rho == 1.0) {
        return Err(Error::InvalidSplit(format!("{num_minority} minority classes leave no majority among {c}")));
    }
    let minority: Vec<usize> = (c - num_minority..c).collect();
    make_imbalanced_split_with(dataset, &minority, rho, seed)
}

/// Same protocol with an explicit minority class list.
pub fn make_imbalanced_split_with(dataset: &Dataset, minority: &[usize], rho: f64, seed: u64) -> Result<SplitSpec> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidSplit(format!("imbalance ratio {rho} must lie in (0, 1]")));
    }
    let few = minority_train_count(rho);
    if few == 0 {
        return Err(Error::InvalidSplit(format!("ratio {rho} rounds to zero minority training nodes")));
    }
    let c = dataset.num_classes();
    let mut counts = vec![MAJORITY_TRAIN; c];
    for &m in minority {
        if m >= c {
            return Err(Error::InvalidSplit(format!("minority class {m} outside 0..{c}")));
        }
        counts[m] = few;
    }
    let mut minority = minority.to_vec();
    minority.sort_unstable();
    minority.dedup();
    build_split(dataset, &counts, minority, seed)
}

/// Exact per-class training counts plus the usual validation and test sizes.
/// Minority classes are recorded as those below the largest count.
pub fn make_explicit_split(dataset: &Dataset, per_class_train: &[usize], seed: u64) -> Result<SplitSpec> {
    let c = dataset.num_classes();
    if per_class_train.len() != c {
        return Err(Error::InvalidSplit(format!("{} train counts for {c} classes", per_class_train.len())));
    }
    if per_class_train.contains(&0) {
        return Err(Error::InvalidSplit("every class needs at least one training node".into()));
    }
    let max = per_class_train.iter().copied().max().unwrap_or(0);
    let minority = (0..c).filter(|&k| per_class_train[k] < max).collect();
    build_split(dataset, per_class_train, minority, seed)
}

fn build_split(dataset: &Dataset, train_counts: &[usize], minority: Vec<usize>, seed: u64) -> Result<SplitSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (class, mut nodes) in dataset.nodes_by_class().into_iter().enumerate() {
        let need = train_counts[class] + VAL_PER_CLASS + TEST_PER_CLASS;
        if nodes.len() < need {
            return Err(Error::InvalidSplit(format!(
                "class {class} has {} nodes, protocol needs {need}",
                nodes.len()
            )));
        }
        nodes.shuffle(&mut rng);
        let (a, rest) = nodes.split_at(train_counts[class]);
        let (b, rest) = rest.split_at(VAL_PER_CLASS);
        train.extend_from_slice(a);
        val.extend_from_slice(b);
        test.extend_from_slice(&rest[..TEST_PER_CLASS]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    let lo = train_counts.iter().copied().min().unwrap_or(0);
    let hi = train_counts.iter().copied().max().unwrap_or(1);
    Ok(SplitSpec { train, val, test, rho: lo as f64 / hi as f64, minority, seed })
}
