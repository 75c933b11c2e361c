//! Adam with bias correction and the cosine-annealed learning rate.

use super::{ModelError, ModelParameters, TrainConfig};

/// First/second moment estimates, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub(crate) m: ModelParameters,
    pub(crate) v: ModelParameters,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step(
    params: &mut ModelParameters,
    grads: &ModelParameters,
    state: &mut AdamState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<(), ModelError> {
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);

    let grad_tensors = grads.named_tensors();
    let mut m_tensors = state.m.named_tensors_mut();
    let mut v_tensors = state.v.named_tensors_mut();
    for (ti, (name, theta)) in params.named_tensors_mut().into_iter().enumerate() {
        let (gname, _, g) = &grad_tensors[ti];
        if gname != &name || g.len() != theta.len() {
            return Err(ModelError::LengthMismatch {
                what: "gradient/parameter tensors",
                left: g.len(),
                right: theta.len(),
            });
        }
        let m = &mut m_tensors[ti].1;
        let v = &mut v_tensors[ti].1;
        for i in 0..theta.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Cosine annealing from `lr_max` at step 0 to `lr_min` at `total_steps`;
/// steps past the end stay at `lr_min`.
pub fn cosine_lr(step: usize, total_steps: usize, cfg: &TrainConfig) -> f64 {
    if total_steps == 0 || step >= total_steps {
        return cfg.lr_min;
    }
    let progress = step as f64 / total_steps as f64;
    cfg.lr_min
        + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + (std::f64::consts::PI * progress).cos())
}
