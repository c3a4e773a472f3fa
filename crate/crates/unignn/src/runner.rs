//! Experiment runs: variant switches, result files and run summaries.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unignn_core::data::{Dataset, SplitSpec};
use unignn_core::metrics::MetricsReport;
use unignn_core::model::Architecture;
use unignn_core::pseudolabel::PseudoLabelSet;
use unignn_core::trainer::{train_observed, TrainConfig, TrainResult};

use crate::io::{self, to_json_pretty, write_atomic};

/// Named model variants, matching the rows of the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// The unmodified configuration.
    Full,
    /// Encoders do not exchange embeddings.
    IndEnc,
    /// Drop the pseudo-label loss.
    NoPseudo,
    /// Structural connectivity equals the input graph (α = 1).
    StructEqInput,
    /// Semantic encoder only.
    NoStructural,
    /// Structural encoder only.
    NoSemantic,
    /// Pseudo-labels without per-class quotas.
    ImbalancedPl,
    /// Semantic clusters are never refreshed.
    FixedSem,
    /// All class weights equal to one.
    UniformWeights,
    /// Plain two-layer GCN: unweighted loss, no pseudo-labels.
    Gcn,
}

impl Variant {
    pub fn apply(self, cfg: &mut TrainConfig) {
        let m = &mut cfg.model;
        match self {
            Variant::Full => {}
            Variant::IndEnc => m.independent_encoders = true,
            Variant::NoPseudo => m.disable_pseudo = true,
            Variant::StructEqInput => m.struct_equals_input = true,
            Variant::NoStructural => m.use_sem_only = true,
            Variant::NoSemantic => m.use_struct_only = true,
            Variant::ImbalancedPl => m.imbalanced_pseudo = true,
            Variant::FixedSem => m.freeze_semantic = true,
            Variant::UniformWeights => m.uniform_class_weights = true,
            Variant::Gcn => {
                m.architecture = Architecture::Gcn;
                m.uniform_class_weights = true;
                m.disable_pseudo = true;
            }
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = clap::ValueEnum::to_possible_value(self).expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// SHA-256 of the resolved config's canonical JSON.
pub fn config_hash(cfg: &TrainConfig) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(cfg).expect("serializable")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub test: MetricsReport,
    pub val: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub variant: Variant,
    pub metrics: Metrics,
    pub best_epoch: usize,
    pub best_val_bacc: f64,
    pub epochs_run: usize,
    pub semantic_refreshes: usize,
    pub structural_nnz: usize,
    pub wall_time_secs: f64,
    pub minority: Vec<usize>,
    pub rho: f64,
    pub config: TrainConfig,
}

/// One row of the per-epoch pseudo-label diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoRow {
    pub epoch: usize,
    pub class: usize,
    pub candidates: usize,
    pub selected: usize,
}

pub struct RunOutput {
    pub result: TrainResult,
    pub summary: Summary,
    pub pseudo_rows: Vec<PseudoRow>,
}

/// Per-epoch JSON lines. Identical runs produce identical bytes.
pub fn log_jsonl(result: &TrainResult) -> String {
    result.log.iter().map(|r| serde_json::to_string(r).expect("serializable") + "\n").collect()
}

pub fn pseudo_tsv(rows: &[PseudoRow]) -> String {
    let mut out = String::from("epoch\tclass\tcandidates\tselected\n");
    for r in rows {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.epoch, r.class, r.candidates, r.selected));
    }
    out
}

/// Trains once. `observer` sees every epoch's record and pseudo-label set.
pub fn run_with<F>(
    dataset: &Dataset,
    split: &SplitSpec,
    cfg: &TrainConfig,
    variant: Variant,
    dataset_name: Option<String>,
    mut observer: F,
) -> unignn_core::Result<RunOutput>
where
    F: FnMut(&unignn_core::trainer::EpochRecord, &PseudoLabelSet),
{
    let mut resolved = cfg.clone();
    variant.apply(&mut resolved);
    resolved.validate()?;
    let start = Instant::now();
    let mut pseudo_rows = Vec::new();
    let result = train_observed(dataset, split, &resolved, |record, set| {
        if record.epoch % 100 == 0 {
            log::info!("epoch {} loss {:.4} val bAcc {:.4}", record.epoch, record.total_loss, record.val_bacc);
        }
        for (class, (&candidates, &selected)) in set.candidates.iter().zip(&set.per_class_counts()).enumerate() {
            pseudo_rows.push(PseudoRow { epoch: record.epoch, class, candidates, selected });
        }
        observer(record, set);
    })?;
    let summary = Summary {
        config_hash: config_hash(&resolved),
        seed: resolved.seed,
        dataset: dataset_name,
        variant,
        metrics: Metrics { test: result.test.clone(), val: result.val.clone() },
        best_epoch: result.best_epoch,
        best_val_bacc: result.best_val_bacc,
        epochs_run: result.epochs_run,
        semantic_refreshes: result.semantic_refreshes,
        structural_nnz: result.structural_nnz,
        wall_time_secs: start.elapsed().as_secs_f64(),
        minority: split.minority.clone(),
        rho: split.rho,
        config: resolved,
    };
    Ok(RunOutput { result, summary, pseudo_rows })
}

pub fn run(
    dataset: &Dataset,
    split: &SplitSpec,
    cfg: &TrainConfig,
    variant: Variant,
    dataset_name: Option<String>,
) -> unignn_core::Result<RunOutput> {
    run_with(dataset, split, cfg, variant, dataset_name, |_, _| {})
}

/// Writes `summary.json`, `metrics.json`, `config.json`, `split.json`,
/// `log.jsonl`, `checkpoint.bin` and `pseudo_labels.tsv` into `dir`.
pub fn write_run(out: &RunOutput, split: &SplitSpec, dir: &Path) -> io::Result<()> {
    write_atomic(&dir.join("config.json"), &to_json_pretty(&out.summary.config))?;
    io::save_split(split, &dir.join("split.json"))?;
    write_atomic(&dir.join("log.jsonl"), log_jsonl(&out.result).as_bytes())?;
    io::save_checkpoint(&out.result.checkpoint, &dir.join("checkpoint.bin"))?;
    write_atomic(&dir.join("pseudo_labels.tsv"), pseudo_tsv(&out.pseudo_rows).as_bytes())?;
    write_atomic(&dir.join("metrics.json"), &to_json_pretty(&out.summary.metrics))?;
    write_atomic(&dir.join("summary.json"), &to_json_pretty(&out.summary))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub balanced_accuracy: [f64; 2],
    pub macro_f1: [f64; 2],
    pub g_means: [f64; 2],
}

impl Aggregate {
    pub fn from_summaries(variant: Variant, runs: &[Summary]) -> Self {
        let stat = |f: fn(&MetricsReport) -> f64| {
            let (m, s) = mean_std(&runs.iter().map(|r| f(&r.metrics.test)).collect::<Vec<_>>());
            [m, s]
        };
        Aggregate {
            variant,
            seeds: runs.iter().map(|r| r.seed).collect(),
            balanced_accuracy: stat(|m| m.balanced_accuracy),
            macro_f1: stat(|m| m.macro_f1),
            g_means: stat(|m| m.g_means),
        }
    }
}
