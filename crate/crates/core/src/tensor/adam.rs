use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Bias-corrected Adam moments for an ordered parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig, param_sizes: &[usize]) -> Self {
        Self {
            config,
            step: 0,
            m: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One update from the gradients stored on `params`. A missing gradient
    /// counts as zero. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [(String, &mut Tensor<T>)]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} parameters, got {}",
                self.m.len(),
                params.len()
            )));
        }
        for (i, (name, p)) in params.iter().enumerate() {
            if p.len() != self.m[i].len() {
                return Err(Error::Shape(format!(
                    "parameter `{name}` has {} values, optimizer state {}",
                    p.len(),
                    self.m[i].len()
                )));
            }
            if p.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(Error::NonFiniteGradient(name.clone()));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let bc1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
        let bc2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
        let (b1, b2) = (T::from_f64_lossy(c.beta1), T::from_f64_lossy(c.beta2));
        let (one_b1, one_b2) = (T::from_f64_lossy(1.0 - c.beta1), T::from_f64_lossy(1.0 - c.beta2));
        let (lr, eps) = (T::from_f64_lossy(c.lr), T::from_f64_lossy(c.epsilon));
        for (i, (_, p)) in params.iter_mut().enumerate() {
            let Some(grad) = p.grad().map(<[T]>::to_vec) else {
                // zero gradient still decays the moments
                self.m[i].iter_mut().for_each(|m| *m *= b1);
                self.v[i].iter_mut().for_each(|v| *v *= b2);
                continue;
            };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((w, g), m), v) in p.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_b1 * *g;
                *v = b2 * *v + one_b2 * *g * *g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
