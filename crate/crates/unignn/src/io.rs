//! Portable dataset, split, config and checkpoint files.
//!
//! A dataset directory holds `meta.json`, `edges.tsv`, `features.tsv` and
//! `labels.tsv`; see `docs/formats.md`. Every writer goes through
//! [`write_atomic`], so readers never observe a half-written file.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use unignn_core::connectivity::{SemanticAdjacency, StructuralAdjacency};
use unignn_core::data::{Dataset, SplitSpec};
use unignn_core::model::Checkpoint;
use unignn_core::trainer::TrainConfig;
use unignn_core::{CsrMatrix, DenseMatrix};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("missing file {0}")]
    Missing(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: unignn_core::Error },
}

pub type Result<T> = std::result::Result<T, IoError>;

/// Contents of `meta.json`. The short keys `N`, `D` and `C` are accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(alias = "N")]
    pub num_nodes: usize,
    #[serde(alias = "D")]
    pub num_features: usize,
    #[serde(alias = "C")]
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => IoError::Missing(path.to_path_buf()),
        _ => IoError::Io { path: path.to_path_buf(), source },
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_string(path)?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Writes `bytes` to a sibling temp file, syncs it, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| IoError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io)
}

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Lines { path, inner: text.lines().enumerate() }
    }

    fn err(&self, line: usize, message: impl Into<String>) -> IoError {
        IoError::Parse { path: self.path.to_path_buf(), line, message: message.into() }
    }
}

impl<'a> Iterator for Lines<'a> {
    /// 1-based line number and content; blank lines are skipped.
    type Item = (usize, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.by_ref().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).find(|(_, l)| !l.trim().is_empty())
    }
}

fn parse_index(lines: &Lines<'_>, line: usize, field: &str, bound: usize, what: &str) -> Result<usize> {
    let v: usize = field.trim().parse().map_err(|_| lines.err(line, format!("invalid {what} {field:?}")))?;
    if v >= bound {
        return Err(lines.err(line, format!("{what} {v} out of range (< {bound})")));
    }
    Ok(v)
}

fn load_edges(path: &Path, n: usize) -> Result<CsrMatrix> {
    let text = read_string(path)?;
    let lines = Lines::new(path, &text);
    let mut directed = BTreeSet::new();
    let (mut self_loops, mut duplicates) = (0usize, 0usize);
    for (no, line) in Lines::new(path, &text) {
        let mut fields = line.split('\t');
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(lines.err(no, "expected \"src<TAB>dst\""));
        };
        let (a, b) = (parse_index(&lines, no, a, n, "node")?, parse_index(&lines, no, b, n, "node")?);
        if a == b {
            self_loops += 1;
        } else if !directed.insert((a, b)) {
            duplicates += 1;
        }
    }
    let one_sided = directed.iter().filter(|&&(a, b)| !directed.contains(&(b, a))).count();
    // A file listing every edge once is an undirected edge list; a file that
    // lists only some reverse pairs is inconsistent.
    if one_sided > 0 && one_sided < directed.len() {
        log::warn!("{}: {one_sided} edges lack their reverse; symmetrizing", path.display());
    }
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self loops", path.display());
    }
    if duplicates > 0 {
        log::info!("{}: merged {duplicates} duplicate edge lines", path.display());
    }
    let undirected: BTreeSet<(usize, usize)> = directed.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
    let triplets = undirected.into_iter().flat_map(|(a, b)| [(a, b, 1.0), (b, a, 1.0)]);
    CsrMatrix::from_triplets(n, n, triplets).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })
}

fn load_features(path: &Path, n: usize, d: usize) -> Result<DenseMatrix> {
    let text = read_string(path)?;
    let lines = Lines::new(path, &text);
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (no, line) in Lines::new(path, &text) {
        if rows == n {
            return Err(lines.err(no, format!("more than {n} feature rows")));
        }
        let before = data.len();
        for field in line.split('\t') {
            let v: f64 = field.trim().parse().map_err(|_| lines.err(no, format!("invalid feature {field:?}")))?;
            if !v.is_finite() {
                return Err(lines.err(no, format!("non-finite feature {field:?}")));
            }
            data.push(v);
        }
        if data.len() - before != d {
            return Err(lines.err(no, format!("expected {d} features, found {}", data.len() - before)));
        }
        rows += 1;
    }
    if rows != n {
        return Err(IoError::Parse { path: path.to_path_buf(), line: 0, message: format!("expected {n} rows, found {rows}") });
    }
    DenseMatrix::from_vec(n, d, data).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })
}

fn load_labels(path: &Path, n: usize, c: usize) -> Result<Vec<usize>> {
    let text = read_string(path)?;
    let lines = Lines::new(path, &text);
    let mut labels = vec![None; n];
    for (no, line) in Lines::new(path, &text) {
        let mut fields = line.split('\t');
        let (Some(node), Some(class), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(lines.err(no, "expected \"node<TAB>class\""));
        };
        let node = parse_index(&lines, no, node, n, "node")?;
        let class = parse_index(&lines, no, class, c, "class")?;
        if labels[node].replace(class).is_some() {
            return Err(lines.err(no, format!("node {node} labelled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| IoError::Parse { path: path.to_path_buf(), line: 0, message: format!("node {i} has no label") })
        })
        .collect()
}

pub fn load_meta(dir: &Path) -> Result<Meta> {
    read_json(&dir.join("meta.json"))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta = load_meta(dir)?;
    let adjacency = load_edges(&dir.join("edges.tsv"), meta.num_nodes)?;
    let features = load_features(&dir.join("features.tsv"), meta.num_nodes, meta.num_features)?;
    let labels = load_labels(&dir.join("labels.tsv"), meta.num_nodes, meta.num_classes)?;
    Dataset::new(features, adjacency, labels, meta.num_classes)
        .map_err(|source| IoError::Invalid { path: dir.to_path_buf(), source })
}

/// Writes `dataset` so that [`load_dataset`] reproduces it bit for bit.
pub fn save_dataset(dataset: &Dataset, dir: &Path, class_names: Option<Vec<String>>) -> Result<()> {
    let meta = Meta {
        num_nodes: dataset.num_nodes(),
        num_features: dataset.num_features(),
        num_classes: dataset.num_classes(),
        class_names,
        source: None,
    };
    write_atomic(&dir.join("meta.json"), &to_json_pretty(&meta))?;

    let mut edges = String::new();
    for (i, j, _) in dataset.adjacency().iter().filter(|&(i, j, _)| i < j) {
        edges.push_str(&format!("{i}\t{j}\n"));
    }
    write_atomic(&dir.join("edges.tsv"), edges.as_bytes())?;

    // `{}` on f64 prints the shortest string that parses back to the same bits.
    let mut features = String::new();
    for i in 0..dataset.num_nodes() {
        let row: Vec<String> = dataset.features().row(i).iter().map(|v| v.to_string()).collect();
        features.push_str(&row.join("\t"));
        features.push('\n');
    }
    write_atomic(&dir.join("features.tsv"), features.as_bytes())?;

    let labels: String = dataset.labels().iter().enumerate().map(|(i, y)| format!("{i}\t{y}\n")).collect();
    write_atomic(&dir.join("labels.tsv"), labels.as_bytes())
}

pub fn load_split(path: &Path, dataset: &Dataset) -> Result<SplitSpec> {
    let split: SplitSpec = read_json(path)?;
    split.validate(dataset).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })?;
    Ok(split)
}

pub fn save_split(split: &SplitSpec, path: &Path) -> Result<()> {
    write_atomic(path, &to_json_pretty(split))
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let cfg: TrainConfig = read_json(path)?;
    cfg.validate().map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })?;
    Ok(cfg)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => IoError::Missing(path.to_path_buf()),
        _ => IoError::Io { path: path.to_path_buf(), source },
    })?;
    Checkpoint::decode(&bytes).map_err(|source| IoError::Invalid { path: path.to_path_buf(), source })
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint.encode())
}

/// `src<TAB>dst<TAB>weight` for every stored entry of A_struct.
pub fn structural_tsv(adj: &StructuralAdjacency) -> String {
    adj.matrix.iter().map(|(i, j, w)| format!("{i}\t{j}\t{w}\n")).collect()
}

/// `node<TAB>cluster` per node.
pub fn assignments_tsv(adj: &SemanticAdjacency) -> String {
    adj.assignments().iter().enumerate().map(|(i, k)| format!("{i}\t{k}\n")).collect()
}
