use std::fs;
use std::path::Path;

use unignn::io::{
    load_checkpoint, load_config, load_dataset, load_split, save_checkpoint, save_dataset, save_split, write_atomic,
    IoError,
};
use unignn_core::data::make_imbalanced_split;
use unignn_core::model::Checkpoint;
use unignn_core::synthetic::{sbm, SbmParams};
use unignn_core::DenseMatrix;

fn write_fixture(dir: &Path, meta: &str, edges: &str, features: &str, labels: &str) {
    fs::write(dir.join("meta.json"), meta).unwrap();
    fs::write(dir.join("edges.tsv"), edges).unwrap();
    fs::write(dir.join("features.tsv"), features).unwrap();
    fs::write(dir.join("labels.tsv"), labels).unwrap();
}

const META: &str = r#"{"num_nodes": 3, "num_features": 2, "num_classes": 2}"#;
const FEATURES: &str = "0.5\t1\n-2\t0\n3.25\t1e-3\n";
const LABELS: &str = "0\t0\n1\t1\n2\t1\n";

fn triangle(edges: &str) -> Result<unignn_core::data::Dataset, IoError> {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), META, edges, FEATURES, LABELS);
    load_dataset(dir.path())
}

#[test]
fn triangle_has_six_entries_and_empty_diagonal() {
    let ds = triangle("0\t1\n1\t2\n2\t0\n").unwrap();
    assert_eq!(ds.adjacency().nnz(), 6);
    assert!((0..3).all(|i| ds.adjacency().get(i, i) == 0.0));
    assert!(ds.adjacency().is_symmetric());
    assert_eq!(ds.features().row(2), &[3.25, 1e-3]);
}

#[test]
fn duplicates_reverse_pairs_and_self_loops_collapse() {
    let once = triangle("0\t1\n1\t2\n2\t0\n").unwrap();
    assert_eq!(triangle("0\t1\n0\t1\n1\t0\n1\t2\n2\t1\n0\t2\n2\t0\n").unwrap(), once);
    assert_eq!(triangle("0\t1\n1\t1\n1\t2\n2\t0\n\n").unwrap(), once);
    // One-sided listings are symmetrized.
    assert_eq!(triangle("0\t1\n1\t0\n1\t2\n2\t0\n").unwrap(), once);
}

#[test]
fn short_meta_keys_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), r#"{"N": 3, "D": 2, "C": 2}"#, "0\t1\n", FEATURES, LABELS);
    assert_eq!(load_dataset(dir.path()).unwrap().num_edges(), 1);
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), META, "0\t1\n", FEATURES, LABELS);
    fs::remove_file(dir.path().join("labels.tsv")).unwrap();
    match load_dataset(dir.path()) {
        Err(IoError::Missing(p)) => assert!(p.ends_with("labels.tsv")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_inputs_are_rejected_with_line_numbers() {
    let cases = [
        ("0\t1\n0\t3\n", FEATURES, LABELS, "edges.tsv", 2),
        ("0\t1\n0 1\n", FEATURES, LABELS, "edges.tsv", 2),
        ("0\t1\n", "0.5\t1\nnan\t0\n3\t1\n", LABELS, "features.tsv", 2),
        ("0\t1\n", "0.5\t1\n1\t0\ninf\t1\n", LABELS, "features.tsv", 3),
        ("0\t1\n", "0.5\t1\n1\n3\t1\n", LABELS, "features.tsv", 2),
        ("0\t1\n", FEATURES, "0\t0\n1\t2\n2\t1\n", "labels.tsv", 2),
        ("0\t1\n", FEATURES, "0\t0\n0\t1\n2\t1\n", "labels.tsv", 2),
    ];
    for (edges, features, labels, file, line) in cases {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), META, edges, features, labels);
        match load_dataset(dir.path()) {
            Err(IoError::Parse { path, line: l, .. }) => {
                assert!(path.ends_with(file), "{path:?}");
                assert_eq!(l, line, "{file}");
            }
            other => panic!("{file}: {other:?}"),
        }
    }
}

#[test]
fn unlabeled_node_and_short_feature_file_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), META, "0\t1\n", FEATURES, "0\t0\n2\t1\n");
    assert!(matches!(load_dataset(dir.path()), Err(IoError::Parse { .. })));
    write_fixture(dir.path(), META, "0\t1\n", "1\t1\n2\t2\n", LABELS);
    assert!(matches!(load_dataset(dir.path()), Err(IoError::Parse { .. })));
}

#[test]
fn save_then_load_is_bit_identical() {
    let params = SbmParams { class_sizes: vec![30, 20, 10], p_in: 0.2, p_out: 0.02, num_features: 7, signal: 1.3 };
    let mut ds = sbm(&params, 4).unwrap();
    // Values whose shortest decimal form is long, tiny or negative zero.
    let mut features = ds.features().clone();
    features.set(0, 0, 0.1 + 0.2);
    features.set(1, 1, -0.0);
    features.set(2, 2, 5e-324);
    features.set(3, 3, -1.7976931348623157e308);
    ds = unignn_core::data::Dataset::new(features, ds.adjacency().clone(), ds.labels().to_vec(), 3).unwrap();

    let a = tempfile::tempdir().unwrap();
    save_dataset(&ds, a.path(), None).unwrap();
    let loaded = load_dataset(a.path()).unwrap();
    let bits = |m: &DenseMatrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(loaded.features()), bits(ds.features()));
    assert_eq!(loaded, ds);

    let b = tempfile::tempdir().unwrap();
    save_dataset(&loaded, b.path(), None).unwrap();
    for f in ["meta.json", "edges.tsv", "features.tsv", "labels.tsv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn splits_round_trip_and_are_validated() {
    let params = SbmParams { class_sizes: vec![110, 110], p_in: 0.05, p_out: 0.01, num_features: 3, signal: 1.0 };
    let ds = sbm(&params, 0).unwrap();
    let split = make_imbalanced_split(&ds, 1, 0.1, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("split.json");
    save_split(&split, &path).unwrap();
    assert_eq!(load_split(&path, &ds).unwrap(), split);
    let text = fs::read_to_string(&path).unwrap();
    for key in ["\"train\"", "\"val\"", "\"test\"", "\"rho\"", "\"minority\"", "\"seed\""] {
        assert!(text.contains(key), "{key}");
    }

    let mut bad = split.clone();
    bad.val.push(bad.train[0]);
    save_split(&bad, &path).unwrap();
    assert!(matches!(load_split(&path, &ds), Err(IoError::Invalid { .. })));
}

#[test]
fn configs_fill_defaults_and_reject_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    fs::write(&path, r#"{"epsilon": 0.7, "model": {"clusters_per_class": 4}}"#).unwrap();
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.epsilon, 0.7);
    assert_eq!(cfg.model.clusters_per_class, 4);
    assert_eq!(cfg.model.hidden_dim, 64);
    assert_eq!(cfg.lr, 1e-2);

    fs::write(&path, r#"{"learning_rate": 0.1}"#).unwrap();
    assert!(matches!(load_config(&path), Err(IoError::Json { .. })));
    fs::write(&path, r#"{"patience": 20, "max_epochs": 10}"#).unwrap();
    assert!(matches!(load_config(&path), Err(IoError::Invalid { .. })));
}

#[test]
fn checkpoint_files_round_trip() {
    let ckpt = Checkpoint {
        entries: vec![
            ("a".into(), DenseMatrix::from_vec(2, 2, vec![1.0, -2.5, 0.0, 3e-9]).unwrap()),
            ("sem.1.assign".into(), DenseMatrix::from_vec(1, 3, vec![0.0, 1.0, 1.0]).unwrap()),
        ],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.bin");
    save_checkpoint(&ckpt, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), ckpt);
    fs::write(&path, b"not a checkpoint").unwrap();
    assert!(matches!(load_checkpoint(&path), Err(IoError::Invalid { .. })));
}

#[test]
fn atomic_writes_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nested/out.txt");
    write_atomic(&path, b"one").unwrap();
    write_atomic(&path, b"two").unwrap();
    assert_eq!(fs::read(&path).unwrap(), b"two");
    let names: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("out.txt")]);
}
