use serde::{Deserialize, Serialize};

use super::{check_len, NnError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
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
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state for one parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig, param_count: usize) -> Self {
        Self {
            config,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        check_len(self.m.len(), params.len())?;
        check_len(self.m.len(), grads.len())?;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let step_size = lr / (1.0 - beta1.powi(t));
        let inv_c2 = 1.0 / (1.0 - beta2.powi(t));
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= step_size * *m / ((*v * inv_c2).sqrt() + eps);
        }
        Ok(())
    }
}

/// `target ← τ·online + (1−τ)·target`.
pub fn soft_update(target: &mut [f64], online: &[f64], tau: f64) -> Result<(), NnError> {
    check_len(target.len(), online.len())?;
    if tau == 1.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}
