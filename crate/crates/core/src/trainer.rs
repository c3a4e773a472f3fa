//! Full-batch training with balanced pseudo-labels and early stopping.
//!
//! One epoch: train-mode forward, pseudo-label selection from its
//! probabilities, `L + λ·L_ps`, backward, Adam, then an eval-mode pass for
//! validation balanced accuracy. Every `beta` epochs the semantic adjacencies
//! of layers `2..=L` are re-clustered from eval-mode embeddings. The best
//! validation epoch (strict improvement) is checkpointed; training stops after
//! `patience` epochs without improvement.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitSpec};
use crate::diff::{adam_step, AdamConfig, Tape, Var};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::model::{
    forward, forward_eval, init_semantic, refresh_semantic, Checkpoint, GraphContext, ModelConfig, ModelParams,
};
use crate::pseudolabel::{bounded, compute_quotas, select_balanced, unbounded, PseudoLabelSet, Quota};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub lambda: f64,
    /// Confidence threshold for pseudo-labels (strict).
    pub epsilon: f64,
    /// Semantic refresh interval in epochs.
    pub beta: usize,
    pub seed: u64,
    /// Let validation and test nodes receive pseudo-labels.
    pub pseudo_include_eval_nodes: bool,
    /// Select pseudo-labels from an eval-mode pass instead of the
    /// training pass.
    pub pseudo_from_eval_pass: bool,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            weight_decay: 5e-4,
            max_epochs: 10_000,
            patience: 1_000,
            lambda: 1.0,
            epsilon: 0.5,
            beta: 100,
            seed: 0,
            pseudo_include_eval_nodes: false,
            pseudo_from_eval_pass: false,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidParameter(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight decay {} must be non-negative", self.weight_decay));
        }
        if self.max_epochs == 0 || self.patience > self.max_epochs {
            return bad(format!("need 1 ≤ max_epochs and patience ≤ max_epochs, got {} / {}", self.max_epochs, self.patience));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be non-negative", self.lambda));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon {} must lie in [0, 1)", self.epsilon));
        }
        if self.beta == 0 {
            return bad("beta must be at least 1".into());
        }
        self.model.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, weight_decay: self.weight_decay, ..AdamConfig::default() }
    }
}

/// `ω_c = 1/|V_l^c|`, or all ones when `uniform`.
pub fn class_weights(labeled_class_sizes: &[usize], uniform: bool) -> Result<Vec<f64>> {
    if let Some(c) = labeled_class_sizes.iter().position(|&n| n == 0) {
        return Err(Error::InvalidSplit(format!("class {c} has no labelled training node")));
    }
    Ok(labeled_class_sizes.iter().map(|&n| if uniform { 1.0 } else { 1.0 / n as f64 }).collect())
}

/// `L + λ·L_ps`. With `λ = 0` the pseudo term is left off the tape entirely.
pub fn total_loss(tape: &mut Tape<'_>, sup: Var, ps: Var, lambda: f64) -> Result<Var> {
    if lambda == 0.0 {
        return Ok(sup);
    }
    let scaled = tape.scale(ps, lambda);
    tape.add(sup, scaled)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_loss: f64,
    pub sup_loss: f64,
    pub pseudo_loss: f64,
    pub pseudo_per_class: Vec<usize>,
    pub val_bacc: f64,
    pub improved: bool,
    pub semantic_refreshed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    pub checkpoint: Checkpoint,
    pub best_epoch: usize,
    pub best_val_bacc: f64,
    pub epochs_run: usize,
    pub semantic_refreshes: usize,
    pub log: Vec<EpochRecord>,
    pub val: MetricsReport,
    pub test: MetricsReport,
    pub test_predictions: Vec<usize>,
    /// Stored entries of the hop-distance adjacency.
    pub structural_nnz: usize,
}

pub fn train(dataset: &Dataset, split: &SplitSpec, cfg: &TrainConfig) -> Result<TrainResult> {
    train_observed(dataset, split, cfg, |_, _| {})
}

/// Nodes eligible for pseudo-labels: everything outside the training set and,
/// unless `include_eval`, outside validation and test too.
pub fn unlabeled_pool(num_nodes: usize, split: &SplitSpec, include_eval: bool) -> Vec<usize> {
    let mut excluded = vec![false; num_nodes];
    for &i in &split.train {
        excluded[i] = true;
    }
    if !include_eval {
        for &i in split.val.iter().chain(&split.test) {
            excluded[i] = true;
        }
    }
    (0..num_nodes).filter(|&i| !excluded[i]).collect()
}

/// [`train`] with a callback after every epoch, receiving the epoch record
/// and the pseudo-labels used in that epoch's loss.
pub fn train_observed<F>(dataset: &Dataset, split: &SplitSpec, cfg: &TrainConfig, mut observer: F) -> Result<TrainResult>
where
    F: FnMut(&EpochRecord, &PseudoLabelSet),
{
    cfg.validate()?;
    split.validate(dataset)?;
    let m = &cfg.model;
    let c = dataset.num_classes();
    let mut ctx = GraphContext::new(dataset, m)?;
    let mut params = ModelParams::init(m, dataset.num_features(), c, cfg.seed)?;
    init_semantic(&mut ctx, m, &params, c, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED_0F_D50));
    let adam = cfg.adam();

    let train_counts = split.train_counts(dataset);
    let weights = class_weights(&train_counts, m.uniform_class_weights)?;
    let quotas: Vec<Quota> = if m.imbalanced_pseudo { unbounded(c) } else { bounded(&compute_quotas(&train_counts)) };
    let pool = unlabeled_pool(dataset.num_nodes(), split, cfg.pseudo_include_eval_nodes);
    let train_labels: Vec<usize> = split.train.iter().map(|&i| dataset.labels()[i]).collect();
    let val_labels = split.val_labels(dataset);
    let test_labels = split.test_labels(dataset);
    let refreshes_enabled = m.has_sem() && m.num_layers >= 2 && !m.freeze_semantic;

    let mut log = Vec::new();
    let mut best: Option<(usize, f64, Checkpoint, Vec<usize>)> = None;
    let mut refreshes = 0;
    for epoch in 1..=cfg.max_epochs {
        let step = {
            let mut fwd = forward(m, &ctx, &params, true, &mut rng)?;
            let pseudo = if m.disable_pseudo {
                PseudoLabelSet::empty(c, cfg.epsilon)
            } else if cfg.pseudo_from_eval_pass {
                let p = forward_eval(m, &ctx, &params)?.probabilities();
                select_balanced(&p, &pool, &quotas, cfg.epsilon)?
            } else {
                select_balanced(&fwd.probabilities(), &pool, &quotas, cfg.epsilon)?
            };
            let logits = fwd.logits;
            let tape = &mut fwd.tape;
            let sup = tape.weighted_cross_entropy(logits, &split.train, &train_labels, &weights)?;
            let ps = tape.mean_cross_entropy(logits, &pseudo.nodes(), &pseudo.classes())?;
            let total = total_loss(tape, sup, ps, cfg.lambda)?;
            let values = [("supervised", sup), ("pseudo", ps), ("total", total)];
            for (term, v) in values {
                if !tape.value(v).is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, term, norms: params.norms_summary() });
                }
            }
            let (sup_v, ps_v, total_v) = (item(tape, sup), item(tape, ps), item(tape, total));
            tape.backward(total)?;
            let grads = fwd.gradients(&params);
            (pseudo, sup_v, ps_v, total_v, grads)
        };
        let (pseudo, sup_loss, pseudo_loss, total_loss_v, grads) = step;
        for (p, g) in params.tensors.iter_mut().zip(&grads) {
            p.accumulate_grad(g)?;
        }
        if let Some(p) = params.tensors.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFiniteUpdate { epoch, parameter: p.name.clone(), norms: params.norms_summary() });
        }
        adam_step(params.tensors.iter_mut(), &adam)?;

        let eval = forward_eval(m, &ctx, &params)?;
        let preds = eval.predictions();
        drop(eval);
        let val_pred: Vec<usize> = split.val.iter().map(|&i| preds[i]).collect();
        let val_bacc = compute_metrics(&val_pred, &val_labels, c)?.balanced_accuracy;
        let improved = best.as_ref().is_none_or(|b| val_bacc > b.1);
        if improved {
            best = Some((epoch, val_bacc, Checkpoint::capture(&params, &ctx), preds));
        }

        let semantic_refreshed = refreshes_enabled && epoch % cfg.beta == 0;
        if semantic_refreshed {
            refresh_semantic(&mut ctx, m, &params)?;
            refreshes += 1;
        }

        let record = EpochRecord {
            epoch,
            total_loss: total_loss_v,
            sup_loss,
            pseudo_loss,
            pseudo_per_class: pseudo.per_class_counts(),
            val_bacc,
            improved,
            semantic_refreshed,
        };
        observer(&record, &pseudo);
        log.push(record);
        let best_epoch = best.as_ref().map_or(epoch, |b| b.0);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let (best_epoch, best_val_bacc, checkpoint, preds) = best.expect("at least one epoch runs");
    let pick = |nodes: &[usize]| nodes.iter().map(|&i| preds[i]).collect::<Vec<_>>();
    let val = compute_metrics(&pick(&split.val), &val_labels, c)?;
    let test_predictions = pick(&split.test);
    let test = compute_metrics(&test_predictions, &test_labels, c)?;
    Ok(TrainResult {
        checkpoint,
        best_epoch,
        best_val_bacc,
        epochs_run: log.len(),
        semantic_refreshes: refreshes,
        log,
        val,
        test,
        test_predictions,
        structural_nnz: ctx.structural_nnz,
    })
}

fn item(tape: &Tape<'_>, v: Var) -> f64 {
    tape.value(v).item().expect("losses are scalars")
}

/// Eval-mode predictions for every node from a stored checkpoint.
pub fn predict_checkpoint(dataset: &Dataset, model: &ModelConfig, checkpoint: &Checkpoint) -> Result<Vec<usize>> {
    let mut ctx = GraphContext::new(dataset, model)?;
    let mut params = ModelParams::init(model, dataset.num_features(), dataset.num_classes(), 0)?;
    checkpoint.restore(&mut params, &mut ctx)?;
    if model.has_sem() && ctx.semantic.len() != model.num_layers {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} semantic layers, model has {}",
            ctx.semantic.len(),
            model.num_layers
        )));
    }
    Ok(forward_eval(model, &ctx, &params)?.predictions())
}

/// Test metrics of a stored checkpoint.
pub fn evaluate_checkpoint(
    dataset: &Dataset,
    split: &SplitSpec,
    model: &ModelConfig,
    checkpoint: &Checkpoint,
) -> Result<MetricsReport> {
    let preds = predict_checkpoint(dataset, model, checkpoint)?;
    let test_pred: Vec<usize> = split.test.iter().map(|&i| preds[i]).collect();
    compute_metrics(&test_pred, &split.test_labels(dataset), dataset.num_classes())
}
