use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{config_err, dim_err, Result};

/// Plain gradient step `θ ← θ − γ·∇θ`.
pub fn sgd_update<P: ParamSet>(params: &mut P, grads: &P, learning_rate: f64) -> Result<()> {
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return config_err(format!("learning rate must be >= 0, got {learning_rate}"));
    }
    params.axpy(-learning_rate, grads)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return config_err(format!("adam rho must be > 0, got {}", self.rho));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return config_err("adam betas must lie in [0, 1)");
        }
        if !(self.eps >= 0.0) {
            return config_err("adam eps must be >= 0");
        }
        Ok(())
    }
}

/// First and second moment accumulators, zero-initialized.
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        let n = params.num_params();
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam step. With `t` the 1-based step index:
///
/// ```text
/// m ← β1·m + (1−β1)·g          v ← β2·v + (1−β2)·g²
/// m̂ = m / (1−β1^t)             v̂ = v / (1−β2^t)
/// θ ← θ − ρ·m̂ / √(v̂ + ε)
/// ```
pub fn adam_update<P: ParamSet>(
    state: &mut AdamState,
    params: &mut P,
    grads: &P,
    cfg: &AdamConfig,
) -> Result<()> {
    cfg.validate()?;
    let g = grads.flatten();
    if g.len() != state.first.len() || g.len() != params.num_params() {
        return dim_err("adam state, params and grads differ in size");
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let mut idx = 0;
    for tensor in params.tensors_mut() {
        for theta in tensor.iter_mut() {
            let gi = g[idx];
            let m = cfg.beta1 * state.first[idx] + (1.0 - cfg.beta1) * gi;
            let v = cfg.beta2 * state.second[idx] + (1.0 - cfg.beta2) * gi * gi;
            state.first[idx] = m;
            state.second[idx] = v;
            *theta -= cfg.rho * (m / bc1) / ((v / bc2) + cfg.eps).sqrt();
            idx += 1;
        }
    }
    Ok(())
}
