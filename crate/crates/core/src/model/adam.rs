use serde::{Deserialize, Serialize};

use super::{ModelConfig, Params};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    cfg: AdamConfig,
    m: Params<T>,
    v: Params<T>,
    step: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, model: &ModelConfig) -> Self {
        Self {
            cfg,
            m: Params::zeros(model),
            v: Params::zeros(model),
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        self.step += 1;
        let b1 = T::lit(self.cfg.beta1);
        let b2 = T::lit(self.cfg.beta2);
        let one = T::one();
        let lr = T::lit(self.cfg.lr);
        let eps = T::lit(self.cfg.eps);
        let c1 = one - b1.powi(self.step);
        let c2 = one - b2.powi(self.step);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (one - b1) * gi;
                v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
                let m_hat = m.data[i] / c1;
                let v_hat = v.data[i] / c2;
                p.data[i] = p.data[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
