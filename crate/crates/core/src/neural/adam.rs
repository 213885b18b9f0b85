use serde::{Deserialize, Serialize};

use super::Params;
use crate::error::{Error, Result};

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

/// Bias-corrected Adam. Moment buffers are created on the first step from
/// the parameter layout.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
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

    pub fn step<P: Params>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grad_slices = grads.slices();
        if grad_slices.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("adam gradient"));
        }
        let mut param_slices = params.slices_mut();
        if param_slices.len() != grad_slices.len() {
            return Err(Error::Shape {
                context: "adam tensors",
                expected: param_slices.len(),
                actual: grad_slices.len(),
            });
        }
        if self.first.is_empty() {
            self.first = grad_slices.iter().map(|g| vec![0.0; g.len()]).collect();
            self.second = self.first.clone();
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for (((p, g), m), v) in param_slices
            .iter_mut()
            .zip(&grad_slices)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            if p.len() != g.len() || m.len() != g.len() {
                return Err(Error::Shape {
                    context: "adam tensor",
                    expected: m.len(),
                    actual: g.len(),
                });
            }
            for k in 0..g.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, DenseLayer};

    /// One scalar parameter wrapped as a 1×1 layer with no bias use.
    fn scalar(p: f64) -> DenseLayer {
        let mut l = DenseLayer::zeros(1, 1, Activation::Identity);
        l.weight[[0, 0]] = p;
        l
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.5);
        let mut g = p.zeros_like();
        g.fill(1.0);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut p, &g).unwrap();
        let moved = 0.5 - p.weight[[0, 0]];
        assert!((moved - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = scalar(0.5);
        let mut g = p.zeros_like();
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut p, &g).unwrap();
        assert_eq!(p.weight[[0, 0]], 0.5);

        g.fill(1.0);
        adam.step(&mut p, &g).unwrap();
        let m_before = adam.first_moments()[0][0];
        let v_before = adam.second_moments()[0][0];
        let before = p.weight[[0, 0]];
        g.fill(0.0);
        adam.step(&mut p, &g).unwrap();
        assert!((adam.first_moments()[0][0] - 0.9 * m_before).abs() < 1e-18);
        assert!((adam.second_moments()[0][0] - 0.999 * v_before).abs() < 1e-18);
        // momentum still carries the parameter
        assert!(p.weight[[0, 0]] < before);
    }

    #[test]
    fn descends_a_parabola() {
        let mut p = scalar(1.0);
        let mut adam = AdamState::new(AdamConfig::default());
        let mut prev = 1.0_f64;
        for _ in 0..100 {
            let mut g = p.zeros_like();
            g.weight[[0, 0]] = 2.0 * p.weight[[0, 0]];
            adam.step(&mut p, &g).unwrap();
            let now = p.weight[[0, 0]].abs();
            assert!(now < prev, "{now} !< {prev}");
            prev = now;
        }
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = scalar(1.0);
        let mut g = p.zeros_like();
        g.weight[[0, 0]] = f64::NAN;
        assert!(AdamState::new(AdamConfig::default()).step(&mut p, &g).is_err());
    }
}
