use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DenseMatrix;
use crate::math;

/// Trainable matrix with its gradient buffer and Adam moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
    pub adam_m: DenseMatrix,
    pub adam_v: DenseMatrix,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: DenseMatrix) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: DenseMatrix::zeros(r, c),
            adam_m: DenseMatrix::zeros(r, c),
            adam_v: DenseMatrix::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn accumulate_grad(&mut self, g: &DenseMatrix) -> Result<()> {
        self.grad.add_assign(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2: added to the gradient before the moment updates.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 5e-4 }
    }
}

/// One bias-corrected Adam update over every parameter, then zeroes the
/// gradients. Nothing is updated if any gradient is non-finite.
pub fn adam_step<'p, I>(params: I, cfg: &AdamConfig) -> Result<()>
where
    I: IntoIterator<Item = &'p mut Parameter>,
{
    let mut params: Vec<&mut Parameter> = params.into_iter().collect();
    if let Some(p) = params.iter().find(|p| !p.grad.is_finite()) {
        return Err(Error::NonFiniteGradient { name: p.name.clone() });
    }
    for p in params.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - math::powi(cfg.beta1, t);
        let bc2 = 1.0 - math::powi(cfg.beta2, t);
        let Parameter { value, grad, adam_m, adam_v, .. } = &mut **p;
        let theta = value.data_mut();
        let (m, v) = (adam_m.data_mut(), adam_v.data_mut());
        for (k, g) in grad.data().iter().enumerate() {
            let g = g + cfg.weight_decay * theta[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            theta[k] -= cfg.lr * m_hat / (math::sqrt(v_hat) + cfg.eps);
        }
        grad.fill(0.0);
    }
    Ok(())
}
