//! Brute-force reference implementations checked against the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unignn_core::connectivity::{build_structural, kmeans, SemanticAdjacency};
use unignn_core::data::Dataset;
use unignn_core::diff::{adam_step, AdamConfig, Parameter, Tape};
use unignn_core::model::{forward_eval, init_semantic, GraphContext, ModelConfig, ModelParams};
use unignn_core::pseudolabel::{bounded, compute_quotas, select_balanced, unbounded, Quota};
use unignn_core::trainer::class_weights;
use unignn_core::{CsrMatrix, DenseMatrix};

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
    CsrMatrix::from_triplets(n, n, t).unwrap()
}

fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn floyd_warshall(g: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = g.num_rows();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (i, j, _) in g.iter() {
        d[i][j] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

fn check_structural_against_floyd_warshall(g: &CsrMatrix, alpha: usize) {
    let d = floyd_warshall(g);
    let s = build_structural(g, alpha).unwrap().matrix.to_dense();
    for i in 0..g.num_rows() {
        for j in 0..g.num_rows() {
            let expected = if i != j && d[i][j] <= alpha { 1.0 / d[i][j] as f64 } else { 0.0 };
            assert_eq!(s.get(i, j), expected, "entry ({i}, {j}) at alpha {alpha}");
        }
    }
}

#[test]
fn structural_matches_floyd_warshall_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..50 {
        let n = rng.gen_range(1..=50);
        let p = rng.gen_range(0.02..0.3);
        let g = random_graph(n, p, &mut rng);
        check_structural_against_floyd_warshall(&g, 1 + case % 3);
    }
}

#[test]
fn structural_on_connected_thirty_node_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    // A spanning path keeps the graph connected; extra random chords on top.
    let mut t: Vec<(usize, usize, f64)> = (0..29).flat_map(|i| [(i, i + 1, 1.0), (i + 1, i, 1.0)]).collect();
    for _ in 0..15 {
        let (a, b) = (rng.gen_range(0..30), rng.gen_range(0..30));
        if a != b {
            t.push((a, b, 1.0));
            t.push((b, a, 1.0));
        }
    }
    let g = CsrMatrix::from_triplets(30, 30, t).unwrap().map_values(|_, _, _| 1.0);
    check_structural_against_floyd_warshall(&g, 3);
}

fn dense_semantic_oracle(assign: &[usize], x: &DenseMatrix) -> DenseMatrix {
    let n = assign.len();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if assign[i] == assign[j] {
                a.set(i, j, 1.0);
            }
        }
    }
    let deg: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let mut norm = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            norm.set(i, j, a.get(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    norm.matmul(x).unwrap()
}

#[test]
fn semantic_propagation_matches_dense_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let (n, k) = if case == 0 { (20, 4) } else { (rng.gen_range(1..40), rng.gen_range(1..8)) };
        let assign: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
        let x = random_dense(n, 5, &mut rng);
        let adj = SemanticAdjacency::from_assignments(assign.clone(), k).unwrap();
        let got = adj.propagate(&x).unwrap();
        let want = dense_semantic_oracle(&assign, &x);
        assert!(got.max_abs_diff(&want) < 1e-12, "case {case}: {}", got.max_abs_diff(&want));
    }
}

fn random_probabilities(n: usize, c: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut p = DenseMatrix::zeros(n, c);
    for i in 0..n {
        let sharp = rng.gen_range(0.5..6.0);
        let logits: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0) * sharp).collect();
        let total: f64 = logits.iter().map(|v| v.exp()).sum();
        for (j, v) in logits.iter().enumerate() {
            p.set(i, j, v.exp() / total);
        }
    }
    p
}

fn sort_oracle(p: &DenseMatrix, pool: &[usize], quotas: &[Quota], eps: f64) -> Vec<(usize, usize)> {
    let c = p.cols();
    let mut out = Vec::new();
    for class in 0..c {
        let mut cands: Vec<(usize, f64)> = Vec::new();
        for &i in pool {
            let row = p.row(i);
            let mut arg = 0;
            for j in 1..c {
                if row[j] > row[arg] {
                    arg = j;
                }
            }
            if arg == class && row[arg] > eps {
                cands.push((i, row[arg]));
            }
        }
        cands.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let take = quotas[class].unwrap_or(usize::MAX).min(cands.len());
        out.extend(cands[..take].iter().map(|&(i, _)| (i, class)));
    }
    out
}

#[test]
fn balanced_selection_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100 {
        let c = rng.gen_range(2..7);
        let p = random_probabilities(50, c, &mut rng);
        let sizes: Vec<usize> = (0..c).map(|_| rng.gen_range(1..=20)).collect();
        let quotas = if case % 10 == 9 { unbounded(c) } else { bounded(&compute_quotas(&sizes)) };
        let mut pool: Vec<usize> = (0..50).filter(|_| rng.gen_bool(0.7)).collect();
        let eps = [0.3, 0.5, 0.7][case % 3];
        let want = sort_oracle(&p, &pool, &quotas, eps);
        pool.reverse();
        let got = select_balanced(&p, &pool, &quotas, eps).unwrap();
        let got: Vec<(usize, usize)> = got.selected.iter().map(|l| (l.node, l.class)).collect();
        assert_eq!(got, want, "case {case}");
    }
}

fn naive_kmeans(x: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> f64 {
    let n = x.rows();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut cent: Vec<Vec<f64>> = idx[..k].iter().map(|&i| x.row(i).to_vec()).collect();
    let mut assign = vec![usize::MAX; n];
    for _ in 0..100 {
        let mut changed = false;
        for i in 0..n {
            let best = (0..k)
                .min_by(|&a, &b| dist(x.row(i), &cent[a]).partial_cmp(&dist(x.row(i), &cent[b])).unwrap())
                .unwrap();
            changed |= assign[i] != best;
            assign[i] = best;
        }
        for (c, centroid) in cent.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for (d, v) in centroid.iter_mut().enumerate() {
                *v = members.iter().map(|&i| x.get(i, d)).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).map(|i| dist(x.row(i), &cent[assign[i]])).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[test]
fn kmeans_loss_within_one_percent_of_best_restart() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let centers = [(0.0, 0.0), (8.0, 1.0), (3.0, 9.0)];
    let mut rows = Vec::new();
    for &(cx, cy) in &centers {
        for _ in 0..20 {
            rows.push(vec![cx + rng.gen_range(-1.0..1.0), cy + rng.gen_range(-1.0..1.0)]);
        }
    }
    let x = DenseMatrix::from_rows(&rows).unwrap();
    let best = (0..50).map(|_| naive_kmeans(&x, 3, &mut rng)).fold(f64::INFINITY, f64::min);
    for seed in 0..5 {
        let model = kmeans(&x, 3, seed).unwrap();
        assert!(model.loss <= best * 1.01, "seed {seed}: {} vs best {best}", model.loss);
    }
}

#[test]
fn adam_matches_reference_trajectory() {
    let a = [1.0, 3.0, 0.5, 2.0];
    let b = [0.2, -1.0, 0.7, 0.0];
    let cfg = AdamConfig { lr: 0.05, weight_decay: 0.01, ..AdamConfig::default() };
    let grad = |theta: &[f64]| -> Vec<f64> { theta.iter().zip(a.iter().zip(&b)).map(|(t, (a, b))| a * t - b).collect() };

    let start = vec![0.5, -0.3, 1.2, 0.0];
    let mut p = Parameter::new("theta", DenseMatrix::from_vec(1, 4, start.clone()).unwrap());
    let (mut theta, mut m, mut v) = (start, vec![0.0; 4], vec![0.0; 4]);
    for t in 1..=10 {
        p.grad = DenseMatrix::from_vec(1, 4, grad(p.value.data())).unwrap();
        adam_step([&mut p], &cfg).unwrap();

        let g = grad(&theta);
        for k in 0..4 {
            let gk = g[k] + cfg.weight_decay * theta[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            let mh = m[k] / (1.0 - cfg.beta1.powi(t));
            let vh = v[k] / (1.0 - cfg.beta2.powi(t));
            theta[k] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
        let dev = p.value.data().iter().zip(&theta).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "step {t}: deviation {dev:e}");
    }
}

#[test]
fn weighted_loss_equals_duplicated_unweighted_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let logits = random_dense(22, 2, &mut rng).scale(3.0);
    let nodes: Vec<usize> = (0..22).collect();
    let labels: Vec<usize> = (0..22).map(|i| usize::from(i >= 20)).collect();
    let w = class_weights(&[20, 2], false).unwrap();
    assert_eq!(w, vec![0.05, 0.5]);

    let mut tape = Tape::new();
    let z = tape.param_owned(logits.clone());
    let weighted = tape.weighted_cross_entropy(z, &nodes, &labels, &w).unwrap();
    let weighted = tape.value(weighted).item().unwrap();

    let mut dup_nodes = nodes[..20].to_vec();
    let mut dup_labels = labels[..20].to_vec();
    for i in 20..22 {
        dup_nodes.extend(std::iter::repeat_n(i, 10));
        dup_labels.extend(std::iter::repeat_n(1, 10));
    }
    let mut tape = Tape::new();
    let z = tape.param_owned(logits);
    let plain = tape.weighted_cross_entropy(z, &dup_nodes, &dup_labels, &[1.0, 1.0]).unwrap();
    let plain = tape.value(plain).item().unwrap();
    // Every node carries weight 1/20 relative to the duplicated sum.
    assert!((weighted - plain / 20.0).abs() < 1e-12, "{weighted} vs {}", plain / 20.0);
}

#[test]
fn sparse_products_and_normalization_match_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = CsrMatrix::from_dense(&random_dense(8, 8, &mut rng)).filter(|i, j, _| (i * 3 + j) % 4 == 0);
    let x = random_dense(8, 3, &mut rng);
    assert!(a.spmm(&x).unwrap().max_abs_diff(&a.to_dense().matmul(&x).unwrap()) < 1e-12);

    let g = random_graph(6, 0.5, &mut rng).map_values(|_, _, _| rng.gen_range(0.1..2.0));
    let sym = CsrMatrix::from_triplets(6, 6, g.iter().filter(|t| t.0 < t.1).flat_map(|(i, j, v)| [(i, j, v), (j, i, v)]))
        .unwrap()
        .add_self_loops(1.0)
        .unwrap();
    let out = sym.sym_normalize().unwrap();
    let d = sym.row_sums();
    for (i, j, v) in sym.iter() {
        assert!((out.get(i, j) * (d[i] * d[j]).sqrt() - v).abs() < 1e-12);
    }
}

/// Straight-line dense re-implementation of the eval-mode network.
fn dense_network(ds: &Dataset, cfg: &ModelConfig, ctx: &GraphContext, params: &ModelParams) -> Vec<DenseMatrix> {
    let relu = |m: DenseMatrix| {
        let data = m.data().iter().map(|v| v.max(0.0)).collect();
        DenseMatrix::from_vec(m.rows(), m.cols(), data).unwrap()
    };
    let w = |name: &str| params.get(name).unwrap().value.clone();
    let n = ds.num_nodes();
    let s = build_structural(ds.adjacency(), cfg.alpha).unwrap().matrix.add_self_loops(1.0).unwrap();
    let deg = s.row_sums();
    let mut a = s.to_dense();
    for i in 0..n {
        for j in 0..n {
            a.set(i, j, a.get(i, j) / (deg[i] * deg[j]).sqrt());
        }
    }
    let sem = |l: usize, x: &DenseMatrix| dense_semantic_oracle(ctx.semantic[l].adjacency.assignments(), x);
    let x = ds.features().clone();
    let hs1 = relu(a.matmul(&x).unwrap().matmul(&w("struct.1.weight")).unwrap());
    let hm1 = relu(sem(0, &x).matmul(&w("sem.1.weight")).unwrap());
    let c1 = hs1.hcat(&hm1).unwrap();
    let hs2 = relu(a.matmul(&c1).unwrap().matmul(&w("struct.2.weight")).unwrap());
    let hm2 = relu(sem(1, &c1).matmul(&w("sem.2.weight")).unwrap());
    let c2 = hs2.hcat(&hm2).unwrap();
    let hidden = relu(a.matmul(&c2).unwrap().matmul(&w("cls.gcn.weight")).unwrap());
    let mut logits = hidden.matmul(&w("cls.out.weight")).unwrap();
    let bias = w("cls.out.bias");
    for i in 0..n {
        for (o, b) in logits.row_mut(i).iter_mut().zip(bias.data()) {
            *o += b;
        }
    }
    vec![hs1, hm1, hs2, hm2, logits]
}

#[test]
fn forward_matches_dense_reimplementation() {
    let params = unignn_core::synthetic::SbmParams {
        class_sizes: vec![4, 4, 4],
        p_in: 0.5,
        p_out: 0.1,
        num_features: 5,
        signal: 2.0,
    };
    let ds = unignn_core::synthetic::sbm(&params, 12).unwrap();
    let cfg = ModelConfig { hidden_dim: 6, num_clusters: Some(4), ..ModelConfig::default() };
    let mut p = ModelParams::init(&cfg, 5, 3, 3).unwrap();
    // Non-zero bias so the bias path is exercised.
    p.get_mut("cls.out.bias").unwrap().value = DenseMatrix::from_vec(1, 3, vec![0.1, -0.2, 0.3]).unwrap();
    let mut ctx = GraphContext::new(&ds, &cfg).unwrap();
    init_semantic(&mut ctx, &cfg, &p, 3, 3).unwrap();
    let cache = forward_eval(&cfg, &ctx, &p).unwrap().cache();
    let want = dense_network(&ds, &cfg, &ctx, &p);
    let got = [&cache.h_struct[0], &cache.h_sem[0], &cache.h_struct[1], &cache.h_sem[1], &cache.logits];
    for (k, (g, w)) in got.iter().zip(&want).enumerate() {
        assert!(g.max_abs_diff(w) < 1e-10, "stage {k}: {}", g.max_abs_diff(w));
    }
}
