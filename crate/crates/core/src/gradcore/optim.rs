use super::{ParamGrads, ParamSet};
use crate::error::{contract, Result};
use serde::{Deserialize, Serialize};

/// Adaptive-moment optimizer state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.get(id).len()]).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of every parameter. Descends the gradient.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamGrads) -> Result<()> {
        if self.first.len() != params.len() {
            return contract("optimizer state was built for a different parameter set");
        }
        for id in params.ids() {
            let Some(g) = grads.get(id) else {
                return contract(format!("missing gradient for parameter '{}'", params.name(id)));
            };
            if g.len() != params.get(id).len() {
                return contract(format!("gradient size mismatch for '{}'", params.name(id)));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for id in params.ids() {
            let g = grads.get(id).expect("checked").data();
            let (m, v) = (&mut self.first[id.index()], &mut self.second[id.index()]);
            for (((p, &gi), mi), vi) in params.get_mut(id).data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
