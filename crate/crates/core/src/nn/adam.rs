use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::backward::GradientSet;
use crate::nn::model::{MlpModel, ParamBuffers};
use crate::scalar::Scalar;

/// Per-epoch multiplicative learning-rate decay.
pub const LR_DECAY: f64 = 0.95;

/// `initial_lr * 0.95^epoch`.
pub fn lr_schedule(initial_lr: f64, epoch: usize) -> f64 {
    decayed_lr(initial_lr, LR_DECAY, epoch)
}

pub fn decayed_lr(initial_lr: f64, decay: f64, epoch: usize) -> f64 {
    initial_lr * decay.powi(epoch as i32)
}

/// Adam moment estimates, shaped like the model they optimize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub first_moment: ParamBuffers<T>,
    pub second_moment: ParamBuffers<T>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state with beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(layer_dims: &[usize]) -> Self {
        Self::with_hyperparameters(layer_dims, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn with_hyperparameters(layer_dims: &[usize], beta1: T, beta2: T, epsilon: T) -> Self {
        Self {
            first_moment: ParamBuffers::zeros(layer_dims),
            second_moment: ParamBuffers::zeros(layer_dims),
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One bias-corrected Adam update of every parameter in place.
pub fn adam_step<T: Scalar>(
    model: &mut MlpModel<T>,
    grads: &GradientSet<T>,
    state: &mut AdamState<T>,
    lr: T,
) -> Result<()> {
    let dims = model.layer_dims().to_vec();
    if !grads.params.matches(&dims) || !state.first_moment.matches(&dims) || !state.second_moment.matches(&dims) {
        return Err(Error::config("gradient or optimizer state shapes do not match the model"));
    }
    if lr.is_nan() || lr <= T::zero() {
        return Err(Error::config(format!("learning rate must be positive, got {lr}")));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);

    let params = model.params_mut().tensors_mut();
    let g = grads.params.tensors();
    let m = state.first_moment.tensors_mut();
    let v = state.second_moment.tensors_mut();
    for (((p, g), m), v) in params.zip(g).zip(m).zip(v) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (T::one() - b1) * g[i];
            v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
