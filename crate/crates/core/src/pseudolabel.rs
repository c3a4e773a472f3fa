//! Balanced pseudo-labelling.
//!
//! Each class `c` may receive up to `max_i |V_l^i| − |V_l^c|` pseudo-labels,
//! which tops every class up to the largest labelled class. A node is a
//! candidate for `c` when its most likely class is `c` and that probability
//! exceeds `ε`; each class keeps its most confident candidates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{argmax, DenseMatrix};

/// `N̂_c = max_i n_i − n_c`.
pub fn compute_quotas(labeled_class_sizes: &[usize]) -> Vec<usize> {
    let max = labeled_class_sizes.iter().copied().max().unwrap_or(0);
    labeled_class_sizes.iter().map(|&n| max - n).collect()
}

/// Per-class cap on selections. `None` means unlimited.
pub type Quota = Option<usize>;

pub fn bounded(quotas: &[usize]) -> Vec<Quota> {
    quotas.iter().copied().map(Some).collect()
}

pub fn unbounded(num_classes: usize) -> Vec<Quota> {
    vec![None; num_classes]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabel {
    pub node: usize,
    pub class: usize,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    /// Grouped by class, each group in decreasing confidence.
    pub selected: Vec<PseudoLabel>,
    pub quotas: Vec<Quota>,
    /// Candidates per class before the quota cut.
    pub candidates: Vec<usize>,
    pub epsilon: f64,
}

impl PseudoLabelSet {
    pub fn empty(num_classes: usize, epsilon: f64) -> Self {
        Self {
            selected: Vec::new(),
            quotas: vec![Some(0); num_classes],
            candidates: vec![0; num_classes],
            epsilon,
        }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.selected.iter().map(|p| p.node).collect()
    }

    pub fn classes(&self) -> Vec<usize> {
        self.selected.iter().map(|p| p.class).collect()
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.quotas.len()];
        for p in &self.selected {
            counts[p.class] += 1;
        }
        counts
    }
}

/// Confident, quota-capped selection from the probability matrix `p`.
///
/// Argmax ties go to the lowest class; equal confidences go to the lower node
/// id. Duplicate ids in `unlabeled` count once, and their order is irrelevant.
pub fn select_balanced(
    p: &DenseMatrix,
    unlabeled: &[usize],
    quotas: &[Quota],
    epsilon: f64,
) -> Result<PseudoLabelSet> {
    let (n, c) = p.shape();
    if quotas.len() != c {
        return Err(Error::DimensionMismatch {
            op: "select_balanced",
            detail: format!("{} quotas for {} classes", quotas.len(), c),
        });
    }
    let mut pool = unlabeled.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if let Some(&bad) = pool.last().filter(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, bound: n });
    }

    let mut by_class: Vec<Vec<(usize, f64)>> = vec![Vec::new(); c];
    for &i in &pool {
        let (cls, conf) = argmax(p.row(i));
        if conf > epsilon {
            by_class[cls].push((i, conf));
        }
    }

    let mut selected = Vec::new();
    let mut candidates = Vec::with_capacity(c);
    for (cls, mut group) in by_class.into_iter().enumerate() {
        candidates.push(group.len());
        // Ids are already ascending, so a stable sort keeps lower ids first on ties.
        group.sort_by(|a, b| b.1.total_cmp(&a.1));
        let take = quotas[cls].map_or(group.len(), |q| q.min(group.len()));
        selected.extend(
            group[..take].iter().map(|&(node, confidence)| PseudoLabel { node, class: cls, confidence }),
        );
    }
    Ok(PseudoLabelSet { selected, quotas: quotas.to_vec(), candidates, epsilon })
}
