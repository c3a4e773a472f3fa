use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    UniGnn,
    /// Plain GCN over `sym_normalize(A + I)`.
    Gcn,
}

/// Operator used by the classifier's GCN layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierAdjacency {
    #[default]
    Structural,
    InputGraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    /// Hop cutoff of the structural adjacency.
    pub alpha: usize,
    /// Explicit k-means cluster count; falls back to `clusters_per_class · C`.
    pub num_clusters: Option<usize>,
    pub clusters_per_class: usize,
    pub classifier_adjacency: ClassifierAdjacency,
    /// Each encoder consumes only its own previous output.
    pub independent_encoders: bool,
    pub use_struct_only: bool,
    pub use_sem_only: bool,
    /// Structural operator built from the input graph alone (`alpha = 1`).
    pub struct_equals_input: bool,
    pub uniform_class_weights: bool,
    pub disable_pseudo: bool,
    /// Pseudo-label every confident node, without per-class quotas.
    pub imbalanced_pseudo: bool,
    /// Keep the initial semantic adjacencies for the whole run.
    pub freeze_semantic: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::UniGnn,
            num_layers: 2,
            hidden_dim: 64,
            dropout: 0.5,
            alpha: 2,
            num_clusters: None,
            clusters_per_class: 10,
            classifier_adjacency: ClassifierAdjacency::Structural,
            independent_encoders: false,
            use_struct_only: false,
            use_sem_only: false,
            struct_equals_input: false,
            uniform_class_weights: false,
            disable_pseudo: false,
            imbalanced_pseudo: false,
            freeze_semantic: false,
        }
    }
}

impl ModelConfig {
    pub fn gcn() -> Self {
        Self { architecture: Architecture::Gcn, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::InvalidParameter("num_layers must be at least 1".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidParameter("hidden_dim must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParameter(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        if self.architecture == Architecture::UniGnn {
            if self.use_struct_only && self.use_sem_only {
                return Err(Error::InvalidParameter("at least one encoder must stay enabled".into()));
            }
            if self.alpha == 0 {
                return Err(Error::InvalidParameter("alpha must be at least 1".into()));
            }
            if self.num_clusters == Some(0) || (self.num_clusters.is_none() && self.clusters_per_class == 0) {
                return Err(Error::InvalidParameter("cluster count must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn has_struct(&self) -> bool {
        self.architecture == Architecture::UniGnn && !self.use_sem_only
    }

    pub fn has_sem(&self) -> bool {
        self.architecture == Architecture::UniGnn && !self.use_struct_only
    }

    pub fn clusters_for(&self, num_classes: usize) -> usize {
        self.num_clusters.unwrap_or(self.clusters_per_class * num_classes)
    }

    /// Hop cutoff actually used for the structural operator.
    pub fn effective_alpha(&self) -> usize {
        if self.struct_equals_input || self.architecture == Architecture::Gcn {
            1
        } else {
            self.alpha
        }
    }

    /// Input width of encoder layer `layer` (1-based) for one stream.
    pub fn encoder_input_dim(&self, layer: usize, num_features: usize) -> usize {
        if layer == 1 {
            num_features
        } else if self.independent_encoders {
            self.hidden_dim
        } else {
            self.streams() * self.hidden_dim
        }
    }

    pub fn streams(&self) -> usize {
        self.has_struct() as usize + self.has_sem() as usize
    }
}
