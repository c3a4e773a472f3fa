//! Finite-difference verification of every differentiable op and of the full
//! training objective on a small synthetic graph.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::connectivity::SemanticAdjacency;
use crate::data::Dataset;
use crate::diff::fd::{central_difference, relative_error, FLOOR, STEP};
use crate::diff::{Tape, Var};
use crate::error::Result;
use crate::graph::{CsrMatrix, DenseMatrix};
use crate::model::{forward, init_semantic, GraphContext, ModelConfig, ModelParams};
use crate::synthetic::{sbm, SbmParams};
use crate::trainer::{class_weights, total_loss};

/// Relative tolerance every check must meet.
pub const TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheck {
    pub name: String,
    pub max_relative_error: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_relative_error < TOLERANCE
    }
}

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    // Bounded away from zero so ReLU kinks sit far from every probe.
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) { v } else { -v }
        })
        .collect();
    DenseMatrix::from_vec(rows, cols, data).expect("finite")
}

fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                t.push((i, j, 1.0));
                t.push((j, i, 1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t).expect("valid triplets")
}

/// Checks `d build / d input_k` for every input. `build` must return a scalar
/// and be a deterministic function of the inputs.
fn check<'a>(
    name: &str,
    inputs: &[DenseMatrix],
    build: impl Fn(&mut Tape<'a>, &[Var]) -> Result<Var>,
) -> Result<GradCheck> {
    let eval = |values: &[DenseMatrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.param_owned(v.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).item().expect("scalar"))
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|v| tape.param_owned(v.clone())).collect();
    let out = build(&mut tape, &vars)?;
    tape.backward(out)?;
    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = tape.grad(vars[k]).cloned().unwrap_or_else(|| DenseMatrix::zeros(input.rows(), input.cols()));
        let numeric = central_difference(
            |probe| {
                let mut values = inputs.to_vec();
                values[k] = probe.clone();
                eval(&values).expect("probe evaluation")
            },
            input,
            STEP,
        );
        worst = worst.max(relative_error(&analytic, &numeric, FLOOR));
    }
    Ok(GradCheck { name: name.into(), max_relative_error: worst })
}

/// `Σ (out · r)` for a fixed random column `r`, so every output entry gets a
/// distinct upstream gradient.
fn probe(tape: &mut Tape<'_>, out: Var, r: &DenseMatrix) -> Result<Var> {
    let rv = tape.constant(r.clone());
    let projected = tape.matmul(out, rv)?;
    Ok(tape.sum(projected))
}

/// Runs every check with inputs drawn from `seed`.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let r3 = random(3, 1, &mut rng);

    let (a, b) = (random(5, 4, &mut rng), random(4, 3, &mut rng));
    out.push(check("matmul", &[a, b], |t, v| {
        let m = t.matmul(v[0], v[1])?;
        probe(t, m, &r3)
    })?);

    let x_sparse = CsrMatrix::from_dense(&random(6, 5, &mut rng)).filter(|i, j, _| (i + 2 * j) % 3 != 0);
    let w = random(5, 3, &mut rng);
    out.push(check("sparse_matmul", &[w], |t, v| {
        let m = t.sparse_matmul(alloc::borrow::Cow::Owned(x_sparse.clone()), v[0])?;
        probe(t, m, &r3)
    })?);

    let adj = random_graph(6, 0.4, &mut rng).add_self_loops(1.0)?.sym_normalize()?;
    let adj = &adj;
    let x = random(6, 3, &mut rng);
    out.push(check("propagate", &[x.clone()], |t, v| {
        let m = t.propagate(adj, v[0])?;
        probe(t, m, &r3)
    })?);

    let sem = SemanticAdjacency::from_assignments(vec![0, 1, 0, 2, 1, 0], 3)?;
    let sem = &sem;
    out.push(check("semantic_propagate", &[x.clone()], |t, v| {
        let m = t.semantic_propagate(sem, v[0])?;
        probe(t, m, &r3)
    })?);

    let r5 = random(5, 1, &mut rng);
    out.push(check("concat_cols", &[x.clone(), random(6, 2, &mut rng)], |t, v| {
        let m = t.concat_cols(v[0], v[1])?;
        probe(t, m, &r5)
    })?);

    out.push(check("relu", &[x.clone()], |t, v| {
        let m = t.relu(v[0]);
        probe(t, m, &r3)
    })?);

    out.push(check("dropout", &[x.clone()], |t, v| {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD0);
        let m = t.dropout(v[0], 0.5, &mut mask_rng, true)?;
        probe(t, m, &r3)
    })?);

    out.push(check("add_row_bias", &[x.clone(), random(1, 3, &mut rng)], |t, v| {
        let m = t.add_row_bias(v[0], v[1])?;
        probe(t, m, &r3)
    })?);

    out.push(check("add_scale_sum", &[x.clone(), random(6, 3, &mut rng)], |t, v| {
        let s = t.scale(v[1], -1.7);
        let m = t.add(v[0], s)?;
        let p = probe(t, m, &r3)?;
        let total = t.sum(v[0]);
        t.add(p, total)
    })?);

    let logits = random(6, 3, &mut rng).scale(2.0);
    let rows = [0, 2, 3, 5];
    let labels = [2, 0, 1, 1];
    let weights = [0.5, 0.25, 1.0];
    out.push(check("weighted_cross_entropy", &[logits.clone()], |t, v| {
        t.weighted_cross_entropy(v[0], &rows, &labels, &weights)
    })?);
    out.push(check("mean_cross_entropy", &[logits], |t, v| t.mean_cross_entropy(v[0], &[1, 4, 4], &[0, 2, 1]))?);

    let (w1, w2) = (random(5, 4, &mut rng), random(4, 3, &mut rng));
    let h = random(6, 5, &mut rng);
    out.push(check("two_layer_network", &[h, w1, w2], |t, v| {
        let z = t.matmul(v[0], v[1])?;
        let z = t.propagate(adj, z)?;
        let z = t.relu(z);
        let z = t.matmul(z, v[2])?;
        let z = t.semantic_propagate(sem, z)?;
        t.weighted_cross_entropy(z, &[0, 1, 4], &[0, 2, 1], &[1.0, 0.5, 0.25])
    })?);

    out.push(total_loss_check("total_loss_unified", ModelConfig::default(), seed)?);
    out.push(total_loss_check("total_loss_gcn", ModelConfig::gcn(), seed)?);
    Ok(out)
}

/// Ten-node, two-class instance shared by the objective checks.
pub fn tiny_instance(seed: u64) -> Result<Dataset> {
    let params = SbmParams { class_sizes: vec![5, 5], p_in: 0.6, p_out: 0.15, num_features: 6, signal: 1.5 };
    sbm(&params, seed)
}

/// `L + λ·L_ps` against every parameter tensor, in training mode with a
/// fixed dropout stream and fixed pseudo-label targets.
fn total_loss_check(name: &str, mut cfg: ModelConfig, seed: u64) -> Result<GradCheck> {
    cfg.hidden_dim = 4;
    cfg.num_clusters = Some(3);
    let ds = tiny_instance(seed)?;
    let params = ModelParams::init(&cfg, ds.num_features(), ds.num_classes(), seed)?;
    let mut ctx = GraphContext::new(&ds, &cfg)?;
    init_semantic(&mut ctx, &cfg, &params, ds.num_classes(), seed)?;
    let train = [0usize, 1, 5];
    let train_labels: Vec<usize> = train.iter().map(|&i| ds.labels()[i]).collect();
    let weights = class_weights(&ds.class_counts(&train), false)?;
    let (pseudo_nodes, pseudo_targets) = ([3usize, 7, 8], [0usize, 1, 1]);
    let lambda = 0.7;

    let loss_of = |p: &ModelParams, grads: bool| -> Result<(f64, Vec<DenseMatrix>)> {
        let mut fwd = forward(&cfg, &ctx, p, true, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xF00D))?;
        let logits = fwd.logits;
        let sup = fwd.tape.weighted_cross_entropy(logits, &train, &train_labels, &weights)?;
        let ps = fwd.tape.mean_cross_entropy(logits, &pseudo_nodes, &pseudo_targets)?;
        let total = total_loss(&mut fwd.tape, sup, ps, lambda)?;
        let value = fwd.tape.value(total).item().expect("scalar");
        if !grads {
            return Ok((value, Vec::new()));
        }
        fwd.tape.backward(total)?;
        Ok((value, fwd.gradients(p)))
    };

    let (_, analytic) = loss_of(&params, true)?;
    let mut worst: f64 = 0.0;
    for (k, tensor) in params.tensors.iter().enumerate() {
        let numeric = central_difference(
            |probe| {
                let mut p = params.clone();
                p.tensors[k].value = probe.clone();
                loss_of(&p, false).expect("probe evaluation").0
            },
            &tensor.value,
            STEP,
        );
        worst = worst.max(relative_error(&analytic[k], &numeric, FLOOR));
    }
    Ok(GradCheck { name: name.into(), max_relative_error: worst })
}
