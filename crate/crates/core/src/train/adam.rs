use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape {
                context: "optimizer state",
                expected: self.m.len(),
                found: if params.len() != self.m.len() { params.len() } else { grads.len() },
                offset: None,
            });
        }
        if let Some(offset) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { offset });
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let c1 = 1.0 - libm::pow(beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(beta2, self.t as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (libm::sqrt(vh) + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut opt = Adam::new(2, AdamConfig::default());
        let mut w = [1.0, -2.0];
        opt.step(&mut w, &[0.5, -0.5], 0.1).unwrap();
        let after_first = w;
        let (m0, v0) = (opt.moments().0.to_vec(), opt.moments().1.to_vec());
        opt.step(&mut w, &[0.0, 0.0], 0.0).unwrap();
        assert_eq!(w, after_first);
        assert_eq!(opt.moments().0[0], 0.9 * m0[0]);
        assert_eq!(opt.moments().1[1], 0.999 * v0[1]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut opt = Adam::new(3, AdamConfig::default());
        let mut w = [0.0; 3];
        opt.step(&mut w, &[3.0, -0.01, 200.0], 0.01).unwrap();
        assert!((w[0] + 0.01).abs() < 1e-8);
        assert!((w[1] - 0.01).abs() < 1e-7);
        assert!((w[2] + 0.01).abs() < 1e-8);
    }

    #[test]
    fn scalar_quadratic_converges() {
        let mut opt = Adam::new(1, AdamConfig::default());
        let mut w = [0.0];
        for _ in 0..100 {
            let g = 2.0 * (w[0] - 3.0);
            opt.step(&mut w, &[g], 0.1).unwrap();
        }
        assert!((w[0] - 3.0).abs() < 0.5, "w = {}", w[0]);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut opt = Adam::new(3, AdamConfig::default());
        let mut w = [0.0; 3];
        let err = opt.step(&mut w, &[0.0, f64::INFINITY, 1.0], 0.1).unwrap_err();
        assert_eq!(err, Error::NonFiniteGradient { offset: 1 });
        assert_eq!(w, [0.0; 3]);
    }
}
