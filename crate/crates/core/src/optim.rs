//! Bias-corrected adaptive moment updates with state keyed by triangle id.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-15 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Moments {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// First and second moments per `(triangle id, parameter group)`; unknown
/// ids start from zero moments.
#[derive(Debug, Clone, Default)]
pub struct Adam {
    pub config: AdamConfig,
    state: HashMap<(u64, u8), Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, state: HashMap::new() }
    }

    /// One update of `params` in place; `lr` holds a rate per entry.
    pub fn step(&mut self, id: u64, group: u8, params: &mut [f64], grads: &[f64], lr: &[f64]) {
        assert!(params.len() == grads.len() && params.len() == lr.len(), "adam slice lengths");
        let c = &self.config;
        let s = self.state.entry((id, group)).or_default();
        if s.m.len() != params.len() {
            *s = Moments { step: 0, m: vec![0.0; params.len()], v: vec![0.0; params.len()] };
        }
        s.step += 1;
        let b1 = 1.0 - c.beta1.powi(s.step as i32);
        let b2 = 1.0 - c.beta2.powi(s.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * g;
            s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = s.m[i] / b1;
            let v_hat = s.v[i] / b2;
            params[i] -= lr[i] * m_hat / (v_hat.sqrt() + c.eps);
        }
    }

    /// Drops state of ids not in `keep`.
    pub fn retain(&mut self, keep: &std::collections::HashSet<u64>) {
        self.state.retain(|(id, _), _| keep.contains(id));
    }

    pub fn moments(&self, id: u64, group: u8) -> Option<&Moments> {
        self.state.get(&(id, group))
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }
}
