use serde::{Deserialize, Serialize};

use super::GradientSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for bias-corrected Adam.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }

    /// Applies one update in place. Moments are allocated lazily on the first
    /// call from the gradient shapes.
    pub fn step(
        &mut self,
        config: &AdamConfig,
        mut params: Vec<&mut [f64]>,
        grads: &GradientSet,
    ) -> Result<()> {
        if !(config.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate {} must be > 0", config.lr)));
        }
        let grads = grads.tensors();
        if params.len() != grads.len()
            || params.iter().zip(grads).any(|(p, g)| p.len() != g.len())
        {
            return Err(Error::Shape("parameters and gradients are not congruent".into()));
        }
        if self.first.is_empty() {
            self.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != grads.len()
            || self.first.iter().zip(grads).any(|(m, g)| m.len() != g.len())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - config.beta1.powi(t);
        let c2 = 1.0 - config.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v, g) = (&mut self.first[i], &mut self.second[i], &grads[i]);
            for j in 0..p.len() {
                m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
                v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= config.lr * m_hat / (v_hat.sqrt() + config.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[f64]) -> GradientSet {
        GradientSet::new(vec![values.to_vec()])
    }

    #[test]
    fn zero_gradient_on_fresh_state_is_identity() {
        let mut p = vec![1.5, -2.0, 0.25];
        let before = p.clone();
        let mut state = AdamState::new();
        state
            .step(&AdamConfig::default(), vec![p.as_mut_slice()], &set(&[0.0; 3]))
            .unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let config = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut p = vec![0.0];
        AdamState::new()
            .step(&config, vec![p.as_mut_slice()], &set(&[1.0]))
            .unwrap();
        // m_hat = 1, v_hat = 1  =>  delta = 0.1 / (1 + 1e-8)
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_scalar_reference() {
        let config = AdamConfig::default();
        let g = 0.37;
        let mut p = vec![0.8];
        let mut state = AdamState::new();
        for _ in 0..2 {
            state.step(&config, vec![p.as_mut_slice()], &set(&[g])).unwrap();
        }

        let (mut x, mut m, mut v) = (0.8f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 1e-3 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p[0] - x).abs() < 1e-12);
        assert!(state.second_moments()[0][0] >= 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut p = vec![0.0, 0.0];
        let mut state = AdamState::new();
        assert!(state
            .step(&AdamConfig::default(), vec![p.as_mut_slice()], &set(&[1.0]))
            .is_err());
        let bad = AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        };
        assert!(state.step(&bad, vec![p.as_mut_slice()], &set(&[1.0, 1.0])).is_err());
    }
}
