use crate::model::Vae;
use crate::nn::Scalar;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state aligned with [`Vae::visit_params`] order.
#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    lr: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<S: Scalar>(model: &mut Vae<S>, lr: f64, params: AdamParams) -> Self {
        let mut m = Vec::new();
        model.visit_params(&mut |_, w, _| m.push(vec![0.0; w.len()]));
        let v = m.clone();
        Self {
            params,
            lr,
            step: 0,
            m,
            v,
        }
    }

    /// Applies one update from the gradients currently stored in `model`.
    pub fn step<S: Scalar>(&mut self, model: &mut Vae<S>) {
        self.step += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let lr = self.lr;
        let mut k = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_params(&mut |_, w, g| {
            let (m, v) = (&mut ms[k], &mut vs[k]);
            for i in 0..w.len() {
                let gi = g[i].as_f64();
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let update = lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                w[i] -= S::from_f64_lossy(update);
            }
            k += 1;
        });
    }
}
