//! Adam optimizer over any [`TensorSet`].
//!
//! Standard update with bias-corrected step size:
//!
//! ```text
//!   m <- b1 m + (1 - b1) g        v <- b2 v + (1 - b2) g^2
//!   lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t)
//!   p <- p - lr_t * m / (sqrt(v) + eps)
//! ```

use serde::{Deserialize, Serialize};

use crate::nn::TensorSet;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    /// Base learning rate.
    pub learning_rate: f64,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator stabilizer.
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer state paired with a parameter type.
#[derive(Debug, Clone)]
pub struct Adam<P: TensorSet> {
    cfg: AdamConfig,
    steps: u64,
    first_moment: P,
    second_moment: P,
}

impl<P: TensorSet> Adam<P> {
    /// Fresh optimizer with zeroed moments shaped like `like`.
    pub fn new(cfg: AdamConfig, like: &P) -> Self {
        Self {
            cfg,
            steps: 0,
            first_moment: like.zeroed(),
            second_moment: like.zeroed(),
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update to `params` given `grads` of the same shape.
    pub fn step(&mut self, params: &mut P, grads: &P) {
        self.steps += 1;
        let t = self.steps as i32;
        let lr_t = self.cfg.learning_rate * (1.0 - self.cfg.beta2.powi(t)).sqrt()
            / (1.0 - self.cfg.beta1.powi(t));
        let (b1, b2, eps) = (self.cfg.beta1, self.cfg.beta2, self.cfg.epsilon);

        let g_all = grads.tensors();
        let mut p_all = params.tensors_mut();
        let mut m_all = self.first_moment.tensors_mut();
        let mut v_all = self.second_moment.tensors_mut();
        assert_eq!(p_all.len(), g_all.len(), "gradient tensor count mismatch");
        for i in 0..p_all.len() {
            let p = &mut p_all[i];
            let g = g_all[i];
            let m = &mut m_all[i];
            let v = &mut v_all[i];
            assert_eq!(p.len(), g.len(), "gradient tensor shape mismatch");
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                p[j] -= lr_t * m[j] / (v[j].sqrt() + eps);
            }
        }
    }
}
