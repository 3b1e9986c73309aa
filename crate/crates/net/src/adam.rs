//! Adaptive moment estimation with bias correction.
//!
//! The update keeps exponential moving averages of the gradient and its
//! square per scalar, divides both by their warm-up bias terms and steps
//!
//! ```text
//! p ← p - lr * m_hat / (sqrt(v_hat) + eps)
//! ```
//!
//! Adversarial training favors a heavier first-moment decay than the usual
//! 0.9, so the defaults here are beta1 = 0.5, beta2 = 0.9.

use crate::error::{Error, Result};
use crate::params::ParamStore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.5, beta2: 0.9, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidInput(format!("adam {name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidInput(format!("adam eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Optimizer state for one parameter store.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, store: &ParamStore) -> Result<Self> {
        cfg.validate()?;
        Ok(Adam { cfg, m: store.zero_like(), v: store.zero_like(), t: 0 })
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// Apply one update. `grads` must be indexed like the store's tensors.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::InvalidInput(format!(
                "adam step: {} gradient tensors for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..store.len() {
            let g = &grads[i];
            if g.len() != store.data(i).len() {
                return Err(Error::InvalidInput(format!(
                    "adam step: gradient {} has {} values for parameter {} of {}",
                    i,
                    g.len(),
                    store.name(i),
                    store.data(i).len()
                )));
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = store.data_mut(i);
            for j in 0..g.len() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// With a constant unit gradient the bias-corrected moments are exactly
    /// one on every step, so each update subtracts lr / (1 + eps).
    #[test]
    fn two_steps_with_unit_gradient_match_the_closed_form() {
        let mut store = ParamStore::new();
        store.add("p", vec![1], vec![1.0]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), &store).unwrap();

        opt.step(&mut store, &[vec![1.0]], 0.1).unwrap();
        assert!(
            (store.data(0)[0] - 0.900000001).abs() < 1e-12,
            "after one step: {}",
            store.data(0)[0]
        );

        opt.step(&mut store, &[vec![1.0]], 0.1).unwrap();
        assert!(
            (store.data(0)[0] - 0.800000002).abs() < 1e-12,
            "after two steps: {}",
            store.data(0)[0]
        );
        assert_eq!(opt.steps_taken(), 2);
    }

    #[test]
    fn zero_gradients_leave_parameters_alone() {
        let mut store = ParamStore::new();
        store.add("p", vec![3], vec![0.5, -0.25, 2.0]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), &store).unwrap();
        let before = store.data(0).to_vec();
        opt.step(&mut store, &[vec![0.0; 3]], 0.1).unwrap();
        assert_eq!(store.data(0), &before[..], "no gradient, no movement");
    }

    #[test]
    fn mismatched_gradient_lists_are_rejected() {
        let mut store = ParamStore::new();
        store.add("p", vec![2], vec![0.0; 2]).unwrap();
        let mut opt = Adam::new(AdamConfig::default(), &store).unwrap();
        assert!(opt.step(&mut store, &[], 0.1).is_err());
        assert!(opt.step(&mut store, &[vec![0.0; 3]], 0.1).is_err());
    }

    #[test]
    fn bad_hyperparameters_are_rejected() {
        let store = ParamStore::new();
        for cfg in [
            AdamConfig { beta1: 1.0, ..Default::default() },
            AdamConfig { beta2: -0.1, ..Default::default() },
            AdamConfig { eps: 0.0, ..Default::default() },
        ] {
            assert!(Adam::new(cfg, &store).is_err(), "{cfg:?} should be invalid");
        }
    }
}
