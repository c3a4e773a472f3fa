//! The unified structural + semantic network, its classifier, and the GCN
//! baseline.
//!
//! Layer `ℓ` of the structural encoder computes
//! `H_struct^ℓ = ReLU(Â_struct · (H_struct^{ℓ-1} ‖ H_sem^{ℓ-1}) · W_struct^ℓ)`;
//! the semantic encoder is identical with the cluster-mean operator of
//! `A_sem^ℓ`. Layer 1 reads the input features in both streams. The
//! classifier is a GCN layer, ReLU, then a linear layer with bias.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use config::{Architecture, ClassifierAdjacency, ModelConfig};
pub use forward::{
    classify, encoder_layer, encoder_stream, forward, forward_eval, init_semantic, refresh_semantic,
    semantic_input, Forward, ForwardCache, GraphContext, LayerInput, Operator, SemanticLayer,
};
pub use params::{glorot, ModelParams};
