use serde::{Deserialize, Serialize};

use super::head::{AttributorHead, Gradients};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub min_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            epochs: 2000,
            lr: 2e-4,
            weight_decay: 0.05,
            warmup_epochs: 20,
            min_lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.lr) {
            return Err(Error::validation(format!(
                "need 0 < min_lr <= lr, got min_lr={} lr={}",
                self.min_lr, self.lr
            )));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::validation(format!(
                "warmup_epochs {} must be < epochs {}",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::validation("AdamW betas must lie in [0, 1) and eps > 0"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::validation("weight_decay must be >= 0"));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWParams {
        AdamWParams {
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }
}

/// Learning rate for `epoch`.
///
/// Linear warmup reaches `lr` on the last warmup epoch; cosine annealing
/// then runs from `lr` down to exactly `min_lr` on the final epoch.
pub fn lr_at(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::validation(format!(
            "epoch {epoch} out of range for {} epochs",
            cfg.epochs
        )));
    }
    if epoch < cfg.warmup_epochs {
        return Ok(cfg.lr * (epoch + 1) as f64 / cfg.warmup_epochs as f64);
    }
    let span = cfg.epochs - 1 - cfg.warmup_epochs;
    let done = epoch - cfg.warmup_epochs;
    if done == span {
        return Ok(cfg.min_lr);
    }
    let t = done as f64 / span as f64;
    Ok(cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + (std::f64::consts::PI * t).cos()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWParams {
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWParams {
    fn default() -> Self {
        TrainConfig::default().optimizer()
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, p: &AdamWParams, bc1: f64, bc2: f64) {
    for i in 0..theta.len() {
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + p.eps);
    }
}

/// One AdamW step: decoupled decay `theta -= lr * wd * theta` on weights
/// only, then the bias-corrected Adam update on all parameters.
pub fn adamw_step(h: &mut AttributorHead, grads: &Gradients, lr: f64, params: &AdamWParams) -> Result<()> {
    if grads.layers.len() != h.layers.len()
        || grads
            .layers
            .iter()
            .zip(&h.layers)
            .any(|(g, l)| g.weight.len() != l.weight.len() || g.bias.len() != l.bias.len())
    {
        return Err(Error::validation("gradient shapes do not match head parameters"));
    }
    h.state.step += 1;
    let t = h.state.step as i32;
    let bc1 = 1.0 - params.beta1.powi(t);
    let bc2 = 1.0 - params.beta2.powi(t);
    for ((layer, g), mom) in h.layers.iter_mut().zip(&grads.layers).zip(&mut h.state.moments) {
        if params.weight_decay != 0.0 {
            let keep = 1.0 - lr * params.weight_decay;
            layer.weight.iter_mut().for_each(|w| *w *= keep);
        }
        adam_update(&mut layer.weight, &g.weight, &mut mom.m_weight, &mut mom.v_weight, lr, params, bc1, bc2);
        adam_update(&mut layer.bias, &g.bias, &mut mom.m_bias, &mut mom.v_bias, lr, params, bc1, bc2);
    }
    Ok(())
}
