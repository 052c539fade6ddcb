use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Adam optimizer state. Moment buffers are kept in 64-bit precision; the
/// updated parameters are rounded back to 32-bit storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> AdamState {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [f32], grads: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NeuralError::DimMismatch {
                what: "adam buffers",
                want: self.m.len(),
                got: params.len().min(grads.len()),
            });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            let p = params[i] as f64 - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            params[i] = p as f32;
        }
        Ok(())
    }
}
