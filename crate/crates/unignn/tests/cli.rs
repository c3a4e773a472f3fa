use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn unignn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unignn")).args(args).env_remove("UNIGNN_OUT_DIR").env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = unignn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic dataset with its split and a short training config.
fn fixture(root: &Path) -> (String, String, String) {
    let data = root.join("data");
    ok(&["synth", "--seed", "0", "--out", s(&data)]);
    let config = root.join("config.json");
    fs::write(&config, r#"{"max_epochs": 40, "patience": 40, "beta": 10, "model": {"num_clusters": 8}}"#).unwrap();
    (s(&data).into(), s(&data.join("split.json")).into(), s(&config).into())
}

#[test]
fn make_split_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _, _) = fixture(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["make-split", "--dataset", &data, "--num-minority", "1", "--rho", "0.10", "--seed", "7", "--out", s(out)]);
    }
    let bytes = fs::read(a.join("split.json")).unwrap();
    assert_eq!(bytes, fs::read(b.join("split.json")).unwrap());
    let split: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(split["train"].as_array().unwrap().len(), 22);
    assert_eq!(split["minority"], serde_json::json!([1]));

    let stdout = ok(&["make-split", "--dataset", &data, "--counts", "3,1", "--seed", "7"]).stdout;
    let explicit: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(explicit["train"].as_array().unwrap().len(), 4);
}

#[test]
fn train_writes_results_and_eval_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, config) = fixture(dir.path());
    let run = dir.path().join("run1");
    ok(&["train", "--dataset", &data, "--split", &split, "--config", &config, "--seed", "1", "--out", s(&run)]);

    let summary = json(&run.join("summary.json"));
    for key in ["balanced_accuracy", "macro_f1", "g_means"] {
        let v = summary["metrics"]["test"][key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
    assert_eq!(summary["seed"], 1);
    assert_eq!(summary["config"]["seed"], 1);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(summary["wall_time_secs"].as_f64().unwrap() > 0.0);
    assert!(summary["best_epoch"].as_u64().unwrap() >= 1);

    let log = fs::read_to_string(run.join("log.jsonl")).unwrap();
    assert_eq!(log.lines().count() as u64, summary["epochs_run"].as_u64().unwrap());
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["epoch"], 1);

    let pseudo = fs::read_to_string(run.join("pseudo_labels.tsv")).unwrap();
    assert_eq!(pseudo.lines().next(), Some("epoch\tclass\tcandidates\tselected"));
    assert_eq!(pseudo.lines().count() as u64, 1 + 2 * summary["epochs_run"].as_u64().unwrap());

    let config_out = run.join("config.json");
    let eval_dir = dir.path().join("eval");
    let args = ["eval", "--dataset", &data, "--split", &split, "--config", s(&config_out)];
    let stdout = ok(&[&args[..], &["--checkpoint", s(&run.join("checkpoint.bin")), "--out", s(&eval_dir)]].concat()).stdout;
    let printed: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(printed, summary["metrics"]["test"]);
    assert_eq!(json(&eval_dir.join("eval.json")), printed);
}

#[test]
fn identical_runs_write_identical_logs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, config) = fixture(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["train", "--dataset", &data, "--split", &split, "--config", &config, "--out", s(out)]);
    }
    for f in ["log.jsonl", "metrics.json", "checkpoint.bin", "pseudo_labels.tsv", "config.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, config) = fixture(dir.path());
    let out = dir.path().join("from-env");
    let r = Command::new(env!("CARGO_BIN_EXE_unignn"))
        .args(["train", "--dataset", &data, "--split", &split, "--config", &config])
        .env("UNIGNN_OUT_DIR", &out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(r.status.success());
    assert!(out.join("summary.json").exists());

    let missing = unignn(&["train", "--dataset", &data, "--split", &split, "--config", &config]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("UNIGNN_OUT_DIR"));
}

#[test]
fn ablations_resolve_their_switches_and_multiple_seeds_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, config) = fixture(dir.path());
    let out = dir.path().join("ablate");
    ok(&["ablate", "--variant", "no-semantic", "--dataset", &data, "--split", &split, "--config", &config, "--seed", "0,1", "--out", s(&out)]);
    for seed in [0, 1] {
        let summary = json(&out.join(format!("seed-{seed}/summary.json")));
        assert_eq!(summary["variant"], "no-semantic");
        assert_eq!(summary["config"]["model"]["use_struct_only"], true);
        assert_eq!(summary["seed"], seed);
    }
    let agg = json(&out.join("aggregate.json"));
    assert_eq!(agg["seeds"], serde_json::json!([0, 1]));

    let gcn = dir.path().join("gcn");
    ok(&["ablate", "--variant", "gcn", "--dataset", &data, "--split", &split, "--config", &config, "--out", s(&gcn)]);
    let summary = json(&gcn.join("summary.json"));
    assert_eq!(summary["config"]["model"]["architecture"], "gcn");
    assert_eq!(summary["semantic_refreshes"], 0);
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, _) = fixture(dir.path());
    let out = s(dir.path()).to_string();

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"lr": 0.01, "unknown_knob": 3}"#).unwrap();
    let r = unignn(&["train", "--dataset", &data, "--split", &split, "--config", s(&bad), "--out", &out]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown_knob"));

    let r = unignn(&["train", "--dataset", "/nonexistent", "--split", &split, "--out", &out]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).starts_with("error: missing file"));

    let r = unignn(&["make-split", "--dataset", &data, "--num-minority", "5", "--rho", "0.1"]);
    assert_eq!(r.status.code(), Some(1));

    let r = unignn(&["ablate", "--variant", "no-such-thing", "--dataset", &data, "--split", &split]);
    assert_eq!(r.status.code(), Some(2));

    let diverging = dir.path().join("diverge.json");
    fs::write(&diverging, r#"{"lr": 1e300, "max_epochs": 5, "patience": 5}"#).unwrap();
    let r = unignn(&["train", "--dataset", &data, "--split", &split, "--config", s(&diverging), "--out", &out]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("non-finite"), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn grad_check_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = String::from_utf8(ok(&["grad-check", "--out", s(dir.path())]).stdout).unwrap();
    assert!(stdout.lines().count() >= 14);
    assert!(stdout.lines().all(|l| l.starts_with("PASS")), "{stdout}");
    let report = json(&dir.path().join("gradcheck.json"));
    assert!(report.as_array().unwrap().iter().any(|c| c["name"] == "total_loss_unified"));
}

#[test]
fn connectivity_export_writes_edge_and_cluster_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, config) = fixture(dir.path());
    let run = dir.path().join("run");
    ok(&["train", "--dataset", &data, "--split", &split, "--config", &config, "--out", s(&run)]);
    let out = dir.path().join("conn");
    ok(&["export-connectivity", "--dataset", &data, "--alpha", "1", "--checkpoint", s(&run.join("checkpoint.bin")), "--out", s(&out)]);

    let edges = fs::read_to_string(data.clone() + "/edges.tsv").unwrap().lines().count();
    let structural = fs::read_to_string(out.join("structural.tsv")).unwrap();
    assert_eq!(structural.lines().count(), 2 * edges);
    assert!(structural.lines().all(|l| l.ends_with("\t1")));
    for layer in [1, 2] {
        let table = fs::read_to_string(out.join(format!("assignments.{layer}.tsv"))).unwrap();
        assert_eq!(table.lines().count(), 200);
        assert!(table.lines().enumerate().all(|(i, l)| l.starts_with(&format!("{i}\t"))));
    }
}
