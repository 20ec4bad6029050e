//! Cosine learning-rate schedule and AdamW.

use crate::error::{dim_err, Result};
use crate::model::OptimizerState;
use crate::tensor::Tensor;

/// `lr_min + ½(lr_max − lr_min)(1 + cos(π·step/total))`, with both ends
/// returned exactly.
pub fn cosine_lr(step: usize, total_steps: usize, lr_max: f64, lr_min: f64) -> f64 {
    if step == 0 || total_steps == 0 {
        return lr_max;
    }
    if step >= total_steps {
        return lr_min;
    }
    let t = step as f64 / total_steps as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// Zero moments shaped like `params`.
    pub fn init_state(params: &[Tensor<f32>]) -> OptimizerState {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        OptimizerState {
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One bias-corrected update: decay `p ← p − lr·wd·p`, then
    /// `p ← p − lr·m̂/(√v̂ + ε)`.
    pub fn step(&self, params: &mut [Tensor<f32>], grads: &[Tensor<f32>], state: &mut OptimizerState, lr: f64) -> Result<()> {
        if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
            return Err(dim_err!(
                "{} parameters, {} gradients, {}/{} moments",
                params.len(),
                grads.len(),
                state.m.len(),
                state.v.len()
            ));
        }
        state.step += 1;
        let t = state.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let g = &grads[i];
            if g.shape() != p.shape() || state.m[i].shape() != p.shape() || state.v[i].shape() != p.shape() {
                return Err(dim_err!("parameter {i}: shape {} vs gradient {}", p.shape(), g.shape()));
            }
            let m = state.m[i].data_mut();
            let v = state.v[i].data_mut();
            for (j, pv) in p.data_mut().iter_mut().enumerate() {
                let gj = g.data()[j] as f64;
                let mj = self.beta1 * m[j] as f64 + (1.0 - self.beta1) * gj;
                let vj = self.beta2 * v[j] as f64 + (1.0 - self.beta2) * gj * gj;
                m[j] = mj as f32;
                v[j] = vj as f32;
                let mut x = *pv as f64;
                x -= lr * self.weight_decay * x;
                x -= lr * (mj / c1) / ((vj / c2).sqrt() + self.eps);
                *pv = x as f32;
            }
        }
        Ok(())
    }
}
