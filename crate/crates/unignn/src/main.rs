use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use unignn::io::{self, to_json_pretty, write_atomic};
use unignn::runner::{self, Aggregate, Variant};
use unignn_core::connectivity::{build_structural, SemanticAdjacency};
use unignn_core::data::{make_explicit_split, make_imbalanced_split, make_imbalanced_split_with};
use unignn_core::gradcheck::{gradient_suite, TOLERANCE};
use unignn_core::synthetic::two_communities;
use unignn_core::trainer::{evaluate_checkpoint, TrainConfig};

const OUT_ENV: &str = "UNIGNN_OUT_DIR";

#[derive(Parser)]
#[command(name = "unignn", version, about = "Class-imbalanced node classification with dual connectivity encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an imbalanced (or explicit-count) split.
    MakeSplit(MakeSplitArgs),
    /// Train one run per seed and write result files.
    Train(TrainArgs),
    /// Train a named ablation variant.
    Ablate(AblateArgs),
    /// Recompute metrics from a checkpoint.
    Eval(EvalArgs),
    /// Finite-difference check of every differentiable op.
    GradCheck(GradCheckArgs),
    /// Write A_struct and checkpointed cluster assignments as TSV.
    ExportConnectivity(ExportArgs),
    /// Write a synthetic dataset and split.
    Synth(SynthArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn require(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| anyhow!("no output directory: pass --out or set {OUT_ENV}"))
    }
}

#[derive(Args)]
struct MakeSplitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Number of minority classes, taken from the highest class ids.
    #[arg(long, default_value_t = 0, conflicts_with_all = ["minority", "counts"])]
    num_minority: usize,
    /// Explicit minority class ids.
    #[arg(long, value_delimiter = ',', conflicts_with = "counts")]
    minority: Option<Vec<usize>>,
    /// Imbalance ratio.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Explicit per-class training counts instead of the ratio protocol.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `split.json` here; prints to stdout when absent.
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// Training config JSON; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One or more seeds; overrides the config's seed.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seed: Vec<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Variant::Full)]
    variant: Variant,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    variant: Variant,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    split: PathBuf,
    /// The run's resolved `config.json`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Writes `eval.json` here as well as printing it.
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes `gradcheck.json` here.
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 2)]
    alpha: usize,
    /// Also export the cluster assignments stored in this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    /// 200 nodes in two communities, one label per class.
    TwoCommunities,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::TwoCommunities)]
    kind: SynthKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

/// Marks errors caused by bad user input; these exit with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0:#}")]
struct UsageError(anyhow::Error);

fn usage<T>(r: std::result::Result<T, impl Into<anyhow::Error>>) -> Result<T> {
    r.map_err(|e| UsageError(e.into()).into())
}

fn make_split(a: MakeSplitArgs) -> Result<()> {
    let ds = io::load_dataset(&a.dataset)?;
    let split = match (&a.counts, &a.minority) {
        (Some(counts), _) => make_explicit_split(&ds, counts, a.seed)?,
        (None, Some(minority)) => make_imbalanced_split_with(&ds, minority, a.rho, a.seed)?,
        (None, None) => make_imbalanced_split(&ds, a.num_minority, a.rho, a.seed)?,
    };
    match &a.out.out {
        Some(dir) => io::save_split(&split, &dir.join("split.json"))?,
        None => print!("{}", String::from_utf8(to_json_pretty(&split))?),
    }
    Ok(())
}

fn train(run: RunArgs, variant: Variant) -> Result<()> {
    let out = run.out.require()?;
    let ds = io::load_dataset(&run.dataset)?;
    let split = io::load_split(&run.split, &ds)?;
    let base = match &run.config {
        Some(path) => usage(io::load_config(path))?,
        None => TrainConfig::default(),
    };
    let seeds = if run.seed.is_empty() { vec![base.seed] } else { run.seed.clone() };
    let name = run.dataset.file_name().map(|n| n.to_string_lossy().into_owned());
    let mut summaries = Vec::new();
    for &seed in &seeds {
        let cfg = TrainConfig { seed, ..base.clone() };
        let dir = if seeds.len() == 1 { out.to_path_buf() } else { out.join(format!("seed-{seed}")) };
        log::info!("training {variant} seed {seed} into {}", dir.display());
        let output = runner::run(&ds, &split, &cfg, variant, name.clone())
            .with_context(|| format!("run with seed {seed} aborted"))?;
        runner::write_run(&output, &split, &dir)?;
        let m = &output.summary.metrics.test;
        println!(
            "seed {seed}: bAcc {:.4} macro-F1 {:.4} G-Means {:.4} (best epoch {})",
            m.balanced_accuracy, m.macro_f1, m.g_means, output.summary.best_epoch
        );
        summaries.push(output.summary);
    }
    if seeds.len() > 1 {
        let agg = Aggregate::from_summaries(variant, &summaries);
        write_atomic(&out.join("aggregate.json"), &to_json_pretty(&agg))?;
        println!(
            "mean over {} seeds: bAcc {:.4} ± {:.4}",
            seeds.len(),
            agg.balanced_accuracy[0],
            agg.balanced_accuracy[1]
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ds = io::load_dataset(&a.dataset)?;
    let split = io::load_split(&a.split, &ds)?;
    let cfg = usage(io::load_config(&a.config))?;
    let ckpt = io::load_checkpoint(&a.checkpoint)?;
    let metrics = evaluate_checkpoint(&ds, &split, &cfg.model, &ckpt)?;
    let json = to_json_pretty(&metrics);
    if let Some(dir) = &a.out.out {
        write_atomic(&dir.join("eval.json"), &json)?;
    }
    print!("{}", String::from_utf8(json)?);
    Ok(())
}

fn grad_check(a: GradCheckArgs) -> Result<()> {
    let checks = gradient_suite(a.seed)?;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!("{status} {:<24} max relative error {:.3e}", c.name, c.max_relative_error);
    }
    if let Some(dir) = &a.out.out {
        write_atomic(&dir.join("gradcheck.json"), &to_json_pretty(&checks))?;
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        bail!("{failed} gradient checks exceed relative tolerance {TOLERANCE:e}");
    }
    Ok(())
}

fn export_connectivity(a: ExportArgs) -> Result<()> {
    let out = a.out.require()?;
    let ds = io::load_dataset(&a.dataset)?;
    let adj = build_structural(ds.adjacency(), a.alpha)?;
    write_atomic(&out.join("structural.tsv"), io::structural_tsv(&adj).as_bytes())?;
    if let Some(path) = &a.checkpoint {
        let ckpt = io::load_checkpoint(path)?;
        for layer in 1.. {
            let (Some(assign), Some(k)) = (ckpt.get(&format!("sem.{layer}.assign")), ckpt.get(&format!("sem.{layer}.clusters")))
            else {
                break;
            };
            let assignments: Vec<usize> = assign.data().iter().map(|&v| v as usize).collect();
            let sem = SemanticAdjacency::from_assignments(assignments, k.data()[0] as usize)?;
            write_atomic(&out.join(format!("assignments.{layer}.tsv")), io::assignments_tsv(&sem).as_bytes())?;
        }
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let out = a.out.require()?;
    let (ds, split) = match a.kind {
        SynthKind::TwoCommunities => two_communities(a.seed)?,
    };
    io::save_dataset(&ds, out, None)?;
    io::save_split(&split, &out.join("split.json"))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MakeSplit(a) => make_split(a),
        Command::Train(a) => train(a.run, a.variant),
        Command::Ablate(a) => train(a.run, a.variant),
        Command::Eval(a) => eval(a),
        Command::GradCheck(a) => grad_check(a),
        Command::ExportConnectivity(a) => export_connectivity(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 2 } else { 1 })
        }
    }
}
