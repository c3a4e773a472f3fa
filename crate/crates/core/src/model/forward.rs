use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::config::{Architecture, ClassifierAdjacency, ModelConfig};
use super::params::ModelParams;
use crate::connectivity::{
    build_structural, kmeans, kmeans_from, KMeansParams, SemanticAdjacency, SparsePoints,
};
use crate::data::Dataset;
use crate::diff::{dropout_sparse, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, DenseMatrix};

/// Cluster assignment for one encoder layer plus the centroids that warm-start
/// the next refresh.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticLayer {
    pub adjacency: SemanticAdjacency,
    pub centroids: DenseMatrix,
}

/// Fixed operators of one graph: sparse features, normalized structural
/// operator, optional classifier operator, and one semantic layer per encoder
/// layer.
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub features: CsrMatrix,
    pub structural: CsrMatrix,
    /// Stored entries of the raw hop-distance adjacency (before self loops).
    pub structural_nnz: usize,
    classifier: Option<CsrMatrix>,
    pub semantic: Vec<SemanticLayer>,
}

impl GraphContext {
    /// Builds features and structural operators. Semantic layers start empty;
    /// see [`init_semantic`].
    pub fn new(dataset: &Dataset, cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let raw = build_structural(dataset.adjacency(), cfg.effective_alpha())?;
        let structural = raw.normalized()?;
        let classifier = match (cfg.architecture, cfg.classifier_adjacency) {
            (Architecture::UniGnn, ClassifierAdjacency::InputGraph) if cfg.effective_alpha() != 1 => {
                Some(dataset.adjacency().add_self_loops(1.0)?.sym_normalize()?)
            }
            _ => None,
        };
        Ok(Self {
            features: CsrMatrix::from_dense(dataset.features()),
            structural,
            structural_nnz: raw.matrix.nnz(),
            classifier,
            semantic: Vec::new(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.num_rows()
    }

    pub fn classifier_operator(&self) -> &CsrMatrix {
        self.classifier.as_ref().unwrap_or(&self.structural)
    }

    pub fn semantic_assignments(&self) -> Vec<Vec<usize>> {
        self.semantic.iter().map(|s| s.adjacency.assignments().to_vec()).collect()
    }
}

fn cluster_seed(seed: u64, layer: usize) -> u64 {
    seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(layer as u64 + 1))
}

/// Clusters `X` for layer 1, then each deeper layer on the semantic
/// encoder's input computed in eval mode from `params`.
pub fn init_semantic(
    ctx: &mut GraphContext,
    cfg: &ModelConfig,
    params: &ModelParams,
    num_classes: usize,
    seed: u64,
) -> Result<()> {
    ctx.semantic.clear();
    if !cfg.has_sem() {
        return Ok(());
    }
    let k = cfg.clusters_for(num_classes);
    let first = kmeans(&SparsePoints::new(&ctx.features), k, cluster_seed(seed, 1))?;
    ctx.semantic.push(SemanticLayer {
        adjacency: SemanticAdjacency::from_clusters(&first),
        centroids: first.centroids,
    });
    for layer in 2..=cfg.num_layers {
        let points = semantic_input(ctx, cfg, params, layer)?;
        let model = kmeans(&points, k, cluster_seed(seed, layer))?;
        ctx.semantic.push(SemanticLayer {
            adjacency: SemanticAdjacency::from_clusters(&model),
            centroids: model.centroids,
        });
    }
    Ok(())
}

/// Re-clusters layers `2..=L` in order, each warm-started from its previous
/// centroids. Layer 1 stays on the input features.
pub fn refresh_semantic(ctx: &mut GraphContext, cfg: &ModelConfig, params: &ModelParams) -> Result<()> {
    if !cfg.has_sem() {
        return Ok(());
    }
    for layer in 2..=cfg.num_layers {
        let points = semantic_input(ctx, cfg, params, layer)?;
        let model = kmeans_from(&points, &ctx.semantic[layer - 1].centroids, &KMeansParams::default())?;
        ctx.semantic[layer - 1] = SemanticLayer {
            adjacency: SemanticAdjacency::from_clusters(&model),
            centroids: model.centroids,
        };
    }
    Ok(())
}

/// Eval-mode input of the semantic encoder at `layer ≥ 2`.
pub fn semantic_input(ctx: &GraphContext, cfg: &ModelConfig, params: &ModelParams, layer: usize) -> Result<DenseMatrix> {
    let mut tape = Tape::new();
    let vars = bind(&mut tape, params);
    let mut rng = NoRng;
    let (hs, hm) = encode(&mut tape, ctx, cfg, params, &vars, layer - 1, false, &mut rng)?;
    let value = |v: Option<Var>| v.map(|v| tape.value(v).clone());
    let (s, m) = (value(hs.last().copied().flatten()), value(hm.last().copied().flatten()));
    Ok(match (s, m) {
        (Some(s), Some(m)) if !cfg.independent_encoders => s.hcat(&m)?,
        (_, Some(m)) => m,
        _ => return Err(Error::InvalidParameter("semantic encoder is disabled".into())),
    })
}

/// Per-layer embeddings and outputs of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardCache {
    pub h_struct: Vec<DenseMatrix>,
    pub h_sem: Vec<DenseMatrix>,
    pub logits: DenseMatrix,
    pub probabilities: DenseMatrix,
}

/// A recorded forward pass. Losses are appended to `tape` by the caller.
pub struct Forward<'a> {
    pub tape: Tape<'a>,
    pub logits: Var,
    pub h_struct: Vec<Var>,
    pub h_sem: Vec<Var>,
    /// Tape handle of each entry of `ModelParams::tensors`.
    pub param_vars: Vec<Var>,
}

impl Forward<'_> {
    pub fn probabilities(&self) -> DenseMatrix {
        self.tape.value(self.logits).softmax_rows()
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.tape.value(self.logits).argmax_rows()
    }

    pub fn cache(&self) -> ForwardCache {
        let values = |vs: &[Var]| vs.iter().map(|&v| self.tape.value(v).clone()).collect();
        ForwardCache {
            h_struct: values(&self.h_struct),
            h_sem: values(&self.h_sem),
            logits: self.tape.value(self.logits).clone(),
            probabilities: self.probabilities(),
        }
    }

    /// Gradient of each parameter after `tape.backward`, zeros where the loss
    /// did not reach it.
    pub fn gradients(&self, params: &ModelParams) -> Vec<DenseMatrix> {
        self.param_vars
            .iter()
            .zip(&params.tensors)
            .map(|(&v, p)| {
                self.tape
                    .grad(v)
                    .cloned()
                    .unwrap_or_else(|| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
            })
            .collect()
    }
}

/// Full forward pass. Dropout draws from `rng` only when `training`.
pub fn forward<'a, R: Rng + ?Sized>(
    cfg: &ModelConfig,
    ctx: &'a GraphContext,
    params: &'a ModelParams,
    training: bool,
    rng: &mut R,
) -> Result<Forward<'a>> {
    let mut tape = Tape::new();
    let param_vars = bind(&mut tape, params);
    match cfg.architecture {
        Architecture::UniGnn => {
            if cfg.has_sem() && ctx.semantic.len() < cfg.num_layers {
                return Err(Error::InvalidParameter("semantic adjacencies are not initialized".into()));
            }
            let (hs, hm) = encode(&mut tape, ctx, cfg, params, &param_vars, cfg.num_layers, training, rng)?;
            let last_s = hs.last().copied().flatten();
            let last_m = hm.last().copied().flatten();
            let w = |name: &str| -> Result<Var> { Ok(param_vars[params.index_of(name)?]) };
            let (w_cls, w_out, b_out) = (w("cls.gcn.weight")?, w("cls.out.weight")?, w("cls.out.bias")?);
            let logits = classify(
                &mut tape,
                last_s,
                last_m,
                ctx.classifier_operator(),
                [w_cls, w_out, b_out],
                cfg.dropout,
                training,
                rng,
            )?;
            Ok(Forward {
                tape,
                logits,
                h_struct: hs.into_iter().flatten().collect(),
                h_sem: hm.into_iter().flatten().collect(),
                param_vars,
            })
        }
        Architecture::Gcn => {
            let mut h = LayerInput::Features(&ctx.features);
            let mut hidden = Vec::new();
            for l in 1..=cfg.num_layers {
                let w = param_vars[params.index_of(&alloc::format!("gcn.{l}.weight"))?];
                let b = param_vars[params.index_of(&alloc::format!("gcn.{l}.bias"))?];
                let xw = project(&mut tape, &h, w, cfg.dropout, training, rng)?;
                let p = tape.propagate(&ctx.structural, xw)?;
                let z = tape.add_row_bias(p, b)?;
                if l == cfg.num_layers {
                    return Ok(Forward { tape, logits: z, h_struct: hidden, h_sem: Vec::new(), param_vars });
                }
                let a = tape.relu(z);
                hidden.push(a);
                h = LayerInput::Hidden(a);
            }
            unreachable!("num_layers is validated to be at least 1")
        }
    }
}

fn bind<'a>(tape: &mut Tape<'a>, params: &'a ModelParams) -> Vec<Var> {
    params.tensors.iter().map(|p| tape.param(&p.value)).collect()
}

/// Input of one encoder stream.
#[derive(Clone, Copy)]
pub enum LayerInput<'a> {
    /// Sparse input features (layer 1).
    Features(&'a CsrMatrix),
    Hidden(Var),
}

/// Dropout on the input, then multiplication by `w`.
fn project<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    input: &LayerInput<'a>,
    w: Var,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    match *input {
        LayerInput::Features(x) => {
            let x = if training && rate > 0.0 {
                Cow::Owned(dropout_sparse(x, rate, rng)?)
            } else {
                Cow::Borrowed(x)
            };
            tape.sparse_matmul(x, w)
        }
        LayerInput::Hidden(h) => {
            let h = tape.dropout(h, rate, rng, training)?;
            tape.matmul(h, w)
        }
    }
}

/// Fixed propagation operator of one stream.
#[derive(Clone, Copy)]
pub enum Operator<'a> {
    Structural(&'a CsrMatrix),
    Semantic(&'a SemanticAdjacency),
}

/// `ReLU(Op · dropout(input) · W)`. Propagation and projection commute, so
/// the narrower product is taken first.
pub fn encoder_stream<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    input: LayerInput<'a>,
    op: Operator<'a>,
    w: Var,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let xw = project(tape, &input, w, rate, training, rng)?;
    let p = match op {
        Operator::Structural(a) => tape.propagate(a, xw)?,
        Operator::Semantic(a) => tape.semantic_propagate(a, xw)?,
    };
    Ok(tape.relu(p))
}

/// One unified layer. Both streams read `concat(h_struct, h_sem)` unless the
/// encoders are independent or one of them is disabled.
#[allow(clippy::too_many_arguments)]
pub fn encoder_layer<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    layer: usize,
    prev: (Option<LayerInput<'a>>, Option<LayerInput<'a>>),
    ctx: &'a GraphContext,
    cfg: &ModelConfig,
    weights: (Option<Var>, Option<Var>),
    training: bool,
    rng: &mut R,
) -> Result<(Option<Var>, Option<Var>)> {
    let (shared_s, shared_m) = match prev {
        (Some(LayerInput::Hidden(s)), Some(LayerInput::Hidden(m))) if !cfg.independent_encoders => {
            let c = LayerInput::Hidden(tape.concat_cols(s, m)?);
            (Some(c), Some(c))
        }
        other => other,
    };
    let s = match (shared_s, weights.0) {
        (Some(input), Some(w)) => Some(encoder_stream(
            tape,
            input,
            Operator::Structural(&ctx.structural),
            w,
            cfg.dropout,
            training,
            rng,
        )?),
        _ => None,
    };
    let m = match (shared_m, weights.1) {
        (Some(input), Some(w)) => {
            let adj = &ctx.semantic[layer - 1].adjacency;
            Some(encoder_stream(tape, input, Operator::Semantic(adj), w, cfg.dropout, training, rng)?)
        }
        _ => None,
    };
    Ok((s, m))
}

type Streams = (Vec<Option<Var>>, Vec<Option<Var>>);

#[allow(clippy::too_many_arguments)]
fn encode<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    ctx: &'a GraphContext,
    cfg: &ModelConfig,
    params: &ModelParams,
    vars: &[Var],
    layers: usize,
    training: bool,
    rng: &mut R,
) -> Result<Streams> {
    let weight = |prefix: &str, enabled: bool, l: usize| -> Result<Option<Var>> {
        if !enabled {
            return Ok(None);
        }
        Ok(Some(vars[params.index_of(&alloc::format!("{prefix}.{l}.weight"))?]))
    };
    let x = LayerInput::Features(&ctx.features);
    let mut prev = (cfg.has_struct().then_some(x), cfg.has_sem().then_some(x));
    let (mut hs, mut hm) = (vec![], vec![]);
    for l in 1..=layers {
        let w = (weight("struct", cfg.has_struct(), l)?, weight("sem", cfg.has_sem(), l)?);
        let (s, m) = encoder_layer(tape, l, prev, ctx, cfg, w, training, rng)?;
        hs.push(s);
        hm.push(m);
        prev = (s.map(LayerInput::Hidden), m.map(LayerInput::Hidden));
    }
    Ok((hs, hm))
}

/// `Linear(dropout(ReLU(Op · dropout(concat) · W_cls)))`, logits only.
#[allow(clippy::too_many_arguments)]
pub fn classify<'a, R: Rng + ?Sized>(
    tape: &mut Tape<'a>,
    h_struct: Option<Var>,
    h_sem: Option<Var>,
    adj: &'a CsrMatrix,
    [w_cls, w_out, b_out]: [Var; 3],
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    let z = match (h_struct, h_sem) {
        (Some(s), Some(m)) => tape.concat_cols(s, m)?,
        (Some(v), None) | (None, Some(v)) => v,
        (None, None) => return Err(Error::InvalidParameter("classifier needs at least one stream".into())),
    };
    let z = tape.dropout(z, rate, rng, training)?;
    let zw = tape.matmul(z, w_cls)?;
    let p = tape.propagate(adj, zw)?;
    let hidden = tape.relu(p);
    let hidden = tape.dropout(hidden, rate, rng, training)?;
    let out = tape.matmul(hidden, w_out)?;
    tape.add_row_bias(out, b_out)
}

/// Random source for eval passes; dropout never draws outside training.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("eval-mode pass drew a random number")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("eval-mode pass drew a random number")
    }

    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("eval-mode pass drew a random number")
    }

    fn try_fill_bytes(&mut self, _: &mut [u8]) -> core::result::Result<(), rand::Error> {
        unreachable!("eval-mode pass drew a random number")
    }
}

/// Eval-mode forward that needs no random source.
pub fn forward_eval<'a>(cfg: &ModelConfig, ctx: &'a GraphContext, params: &'a ModelParams) -> Result<Forward<'a>> {
    forward(cfg, ctx, params, false, &mut NoRng)
}
