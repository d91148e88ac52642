//! Adam with bias correction and the inverse-square-root warmup schedule.

use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Optimizer and loss hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub warmup_steps: u64,
    pub d_model: usize,
    pub label_smoothing: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-9,
            warmup_steps: 8000,
            d_model: 512,
            label_smoothing: 0.1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.beta1 && self.beta1 < 1.0) {
            return Err(Error::invalid_argument(format!(
                "beta1 {} not in (0,1)",
                self.beta1
            )));
        }
        if !(0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::invalid_argument(format!(
                "beta2 {} not in (0,1)",
                self.beta2
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::invalid_argument("epsilon must be positive"));
        }
        if self.warmup_steps == 0 {
            return Err(Error::invalid_argument("warmup_steps must be positive"));
        }
        if self.d_model == 0 {
            return Err(Error::invalid_argument("d_model must be positive"));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::invalid_argument("label_smoothing must be in [0,1)"));
        }
        Ok(())
    }
}

/// Learning rate at `step` (1-based):
/// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).
/// The two branches meet exactly at step == warmup_steps.
pub fn lr_at(step: u64, cfg: &OptimizerConfig) -> Result<f64> {
    if step < 1 {
        return Err(Error::invalid_argument("lr_at: step must be >= 1"));
    }
    let s = step as f64;
    let w = cfg.warmup_steps as f64;
    Ok((cfg.d_model as f64).powf(-0.5) * (s.powf(-0.5)).min(s * w.powf(-1.5)))
}

/// First and second moment estimates for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<F: Scalar> {
    pub m: Vec<F>,
    pub v: Vec<F>,
}

impl<F: Scalar> AdamState<F> {
    pub fn zeros(n: usize) -> Self {
        AdamState {
            m: vec![F::ZERO; n],
            v: vec![F::ZERO; n],
        }
    }
}

/// One bias-corrected Adam update on a flat parameter slice.
pub fn adam_step<F: Scalar>(
    params: &mut [F],
    grads: &[F],
    state: &mut AdamState<F>,
    step: u64,
    lr: f64,
    cfg: &OptimizerConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len()
    {
        return Err(Error::invalid_argument(format!(
            "adam_step shape mismatch: params={}, grads={}, m={}, v={}",
            params.len(),
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    if step < 1 {
        return Err(Error::invalid_argument("adam_step: step must be >= 1"));
    }
    let b1 = F::from_f64(cfg.beta1);
    let b2 = F::from_f64(cfg.beta2);
    let one = F::ONE;
    let bc1 = F::from_f64(1.0 - cfg.beta1.powi(step as i32));
    let bc2 = F::from_f64(1.0 - cfg.beta2.powi(step as i32));
    let eps = F::from_f64(cfg.epsilon);
    let lr = F::from_f64(lr);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
