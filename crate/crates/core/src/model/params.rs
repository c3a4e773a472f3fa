use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Architecture, ModelConfig};
use crate::diff::Parameter;
use crate::error::{Error, Result};
use crate::graph::DenseMatrix;
use crate::math;

/// Every trainable tensor of a model, in a fixed order that the forward pass
/// and the checkpoint codec both rely on.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub tensors: Vec<Parameter>,
}

/// Glorot-uniform `fan_in × fan_out` matrix.
pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> DenseMatrix {
    let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
    DenseMatrix::from_raw(fan_in, fan_out, data)
}

impl ModelParams {
    /// Layout for Uni-GNN: `struct.{l}.weight` for each layer, then
    /// `sem.{l}.weight`, then `cls.gcn.weight`, `cls.out.weight`,
    /// `cls.out.bias`. For the GCN baseline: `gcn.{l}.weight`, `gcn.{l}.bias`.
    pub fn init(cfg: &ModelConfig, num_features: usize, num_classes: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        let h = cfg.hidden_dim;
        match cfg.architecture {
            Architecture::UniGnn => {
                for (enabled, prefix) in [(cfg.has_struct(), "struct"), (cfg.has_sem(), "sem")] {
                    if !enabled {
                        continue;
                    }
                    for l in 1..=cfg.num_layers {
                        let w = glorot(cfg.encoder_input_dim(l, num_features), h, &mut rng);
                        tensors.push(Parameter::new(format!("{prefix}.{l}.weight"), w));
                    }
                }
                let concat = cfg.streams() * h;
                tensors.push(Parameter::new("cls.gcn.weight", glorot(concat, h, &mut rng)));
                tensors.push(Parameter::new("cls.out.weight", glorot(h, num_classes, &mut rng)));
                tensors.push(Parameter::new("cls.out.bias", DenseMatrix::zeros(1, num_classes)));
            }
            Architecture::Gcn => {
                for l in 1..=cfg.num_layers {
                    let fan_in = if l == 1 { num_features } else { h };
                    let fan_out = if l == cfg.num_layers { num_classes } else { h };
                    tensors.push(Parameter::new(format!("gcn.{l}.weight"), glorot(fan_in, fan_out, &mut rng)));
                    tensors.push(Parameter::new(format!("gcn.{l}.bias"), DenseMatrix::zeros(1, fan_out)));
                }
            }
        }
        Ok(Self { tensors })
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.tensors.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.tensors.iter_mut().find(|p| p.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.tensors
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::InvalidParameter(format!("missing parameter `{name}`")))
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Parameter::zero_grad);
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|p| p.value.data().len()).sum()
    }

    /// `name=‖θ‖` pairs, used in abort diagnostics.
    pub fn norms_summary(&self) -> String {
        let parts: Vec<String> =
            self.tensors.iter().map(|p| format!("{}={:.4e}", p.name, p.value.frobenius_norm())).collect();
        parts.join(", ")
    }

    /// Replaces values by name; shapes must match. Optimizer state is reset.
    pub fn load_values<'n>(&mut self, values: impl IntoIterator<Item = (&'n str, &'n DenseMatrix)>) -> Result<()> {
        for (name, value) in values {
            let p = self
                .get_mut(name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{name}`")))?;
            if p.value.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, checkpoint has {:?}",
                    p.value.shape(),
                    value.shape()
                )));
            }
            *p = Parameter::new(name, value.clone());
        }
        Ok(())
    }
}
