//! AdamW and the cosine learning-rate schedule.

use std::f64::consts::PI;

use crate::domain::Hyperparams;
use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamGrads, TENSOR_NAMES};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// Cosine annealing from `lr_max` down to `lr_min` over `t_max` epochs.
///
/// `t` is measured in (fractional) epochs. Past `t_max` the schedule
/// restarts: `t` is taken modulo `t_max`.
pub fn cosine_lr(t: f64, hp: &Hyperparams) -> f64 {
    let t_max = hp.t_max as f64;
    let t = t.max(0.0);
    let t = if t > t_max { t % t_max } else { t };
    hp.lr_min + 0.5 * (hp.lr_max - hp.lr_min) * (1.0 + (PI * t / t_max).cos())
}

/// One AdamW update with decoupled weight decay.
///
/// Fails without touching `params` or `state` if any gradient is non-finite.
pub fn adamw_step(
    params: &mut ModelParams,
    grads: &ParamGrads,
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    for (name, g) in TENSOR_NAMES.iter().zip(grads.tensors()) {
        if let Some(i) = g.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient of `{name}` is {} at flat index {i}; step aborted",
                g.data[i]
            )));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    let OptimizerState { m, v, .. } = state;
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(m.tensors_mut())
        .zip(v.tensors_mut())
    {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = BETA1 * m.data[i] + (1.0 - BETA1) * gi;
            v.data[i] = BETA2 * v.data[i] + (1.0 - BETA2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            p.data[i] -= lr * (m_hat / (v_hat.sqrt() + EPSILON) + weight_decay * p.data[i]);
        }
    }
    Ok(())
}

/// Scales `grads` so their global L2 norm is at most `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut ParamGrads, max_norm: Option<f64>) -> f64 {
    let norm = grads.l2_norm();
    if let Some(max) = max_norm {
        if norm > max {
            grads.scale(max / norm);
        }
    }
    norm
}
