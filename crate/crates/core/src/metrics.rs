//! Class-balanced evaluation metrics.
//!
//! G-Means is the macro average of `sqrt(recall_c · specificity_c)` with
//! one-vs-rest specificity.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub balanced_accuracy: f64,
    pub macro_f1: f64,
    pub g_means: f64,
    pub accuracy: f64,
    pub per_class_recall: Vec<f64>,
    pub per_class_precision: Vec<f64>,
    pub per_class_specificity: Vec<f64>,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

pub fn compute_metrics(predictions: &[usize], truth: &[usize], num_classes: usize) -> Result<MetricsReport> {
    if predictions.len() != truth.len() {
        return Err(Error::InvalidEvaluation(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::InvalidEvaluation("zero classes".into()));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &t) in predictions.iter().zip(truth) {
        if p >= num_classes || t >= num_classes {
            return Err(Error::InvalidEvaluation(format!(
                "class index {} outside 0..{num_classes}",
                p.max(t)
            )));
        }
        confusion[t][p] += 1;
    }
    let total = truth.len();
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    if let Some(c) = support.iter().position(|&s| s == 0) {
        return Err(Error::InvalidEvaluation(format!("class {c} is absent from the ground truth")));
    }
    let predicted: Vec<usize> = (0..num_classes).map(|c| confusion.iter().map(|r| r[c]).sum()).collect();

    let mut recall = Vec::with_capacity(num_classes);
    let mut precision = Vec::with_capacity(num_classes);
    let mut specificity = Vec::with_capacity(num_classes);
    let (mut f1_sum, mut g_sum, mut correct) = (0.0, 0.0, 0usize);
    for c in 0..num_classes {
        let tp = confusion[c][c];
        correct += tp;
        let fp = predicted[c] - tp;
        let negatives = total - support[c];
        let r = tp as f64 / support[c] as f64;
        let p = if predicted[c] == 0 { 0.0 } else { tp as f64 / predicted[c] as f64 };
        // With a single class there are no negatives; nothing can be misclassified as it.
        let s = if negatives == 0 { 1.0 } else { (negatives - fp) as f64 / negatives as f64 };
        f1_sum += if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        g_sum += math::sqrt(r * s);
        recall.push(r);
        precision.push(p);
        specificity.push(s);
    }
    let k = num_classes as f64;
    Ok(MetricsReport {
        balanced_accuracy: recall.iter().sum::<f64>() / k,
        macro_f1: f1_sum / k,
        g_means: g_sum / k,
        accuracy: correct as f64 / total as f64,
        per_class_recall: recall,
        per_class_precision: precision,
        per_class_specificity: specificity,
        confusion,
    })
}
