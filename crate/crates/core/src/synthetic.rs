//! Seeded graph generators for tests, demos and scale checks.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, DenseMatrix};
use crate::math;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
}

/// Stochastic block model with Gaussian class-mean features.
#[derive(Clone, Debug, PartialEq)]
pub struct SbmParams {
    pub class_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub num_features: usize,
    /// Norm of each class mean; features add unit-variance noise.
    pub signal: f64,
}

/// Nodes are grouped by class in id order. Class means are random directions.
pub fn sbm(params: &SbmParams, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = params.class_sizes.iter().enumerate().flat_map(|(c, &s)| vec![c; s]).collect();
    let n = labels.len();
    let c = params.class_sizes.len();
    let d = params.num_features;
    if d == 0 {
        return Err(Error::InvalidParameter("need at least one feature".into()));
    }

    let mut means = DenseMatrix::zeros(c, d);
    for k in 0..c {
        let row = means.row_mut(k);
        row.iter_mut().for_each(|v| *v = gaussian(&mut rng));
        let norm = math::sqrt(row.iter().map(|v| v * v).sum::<f64>()).max(1e-12);
        row.iter_mut().for_each(|v| *v *= params.signal / norm);
    }
    let mut features = DenseMatrix::zeros(n, d);
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..d {
            features.set(i, j, means.get(y, j) + gaussian(&mut rng));
        }
    }

    let mut triplets = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { params.p_in } else { params.p_out };
            if rng.gen::<f64>() < p {
                triplets.push((i, j, 1.0));
                triplets.push((j, i, 1.0));
            }
        }
    }
    let adjacency = CsrMatrix::from_triplets(n, n, triplets)?;
    Dataset::new(features, adjacency, labels, c)
}

/// Two dense 100-node communities with well separated features, one labelled
/// node per class, 20 validation nodes per class and the rest for testing.
pub fn two_communities(seed: u64) -> Result<(Dataset, SplitSpec)> {
    let params = SbmParams { class_sizes: vec![100, 100], p_in: 0.1, p_out: 0.005, num_features: 16, signal: 4.0 };
    let ds = sbm(&params, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
    let (mut train, mut val, mut test) = (vec![], vec![], vec![]);
    for mut nodes in ds.nodes_by_class() {
        nodes.shuffle(&mut rng);
        train.push(nodes[0]);
        val.extend_from_slice(&nodes[1..21]);
        test.extend_from_slice(&nodes[21..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    let split = SplitSpec { train, val, test, rho: 1.0, minority: vec![], seed };
    Ok((ds, split))
}

/// Chung–Lu graph with expected degrees `∝ (i + offset)^(-1/(γ-1))`,
/// sampled until exactly `num_edges` distinct undirected edges exist.
pub fn power_law_graph(num_nodes: usize, num_edges: usize, gamma: f64, offset: f64, seed: u64) -> Result<CsrMatrix> {
    if num_nodes < 2 || gamma <= 1.0 || num_edges > num_nodes * (num_nodes - 1) / 2 {
        return Err(Error::InvalidParameter("infeasible power-law graph".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exponent = -1.0 / (gamma - 1.0);
    let mut cumulative = Vec::with_capacity(num_nodes);
    let mut total = 0.0;
    for i in 0..num_nodes {
        total += libm::pow(i as f64 + offset, exponent);
        cumulative.push(total);
    }
    let draw = |rng: &mut ChaCha8Rng| {
        let u = rng.gen::<f64>() * total;
        cumulative.partition_point(|&c| c <= u).min(num_nodes - 1)
    };
    let mut edges = BTreeSet::new();
    while edges.len() < num_edges {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    CsrMatrix::from_triplets(num_nodes, num_nodes, edges.into_iter().flat_map(|(a, b)| [(a, b, 1.0), (b, a, 1.0)]))
}

/// Process-scale stand-in for the PubMed citation graph: 19,717 nodes and
/// 44,324 undirected edges with a heavy-tailed degree distribution.
pub fn pubmed_scale_graph(seed: u64) -> Result<CsrMatrix> {
    power_law_graph(19_717, 44_324, 3.0, 3.0, seed)
}
