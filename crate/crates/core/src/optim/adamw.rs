use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Moment estimates for every tensor in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub config: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamWState {
    pub fn new(store: &ParamStore, config: AdamWConfig) -> Self {
        let zeros: Vec<Vec<f64>> = store.ids().map(|id| vec![0.0; store.get(id).len()]).collect();
        AdamWState {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update. Weight decay acts on the parameters directly:
    /// `θ ← θ − lr·m̂/(√v̂ + ε) − lr·λ·θ`.
    ///
    /// Non-finite gradients are refused and leave parameters and moments untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Vec<f64>], lr: f64) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::dim("adamw", &[store.len()], &[grads.len()]));
        }
        for (id, g) in store.ids().zip(grads) {
            if g.len() != store.get(id).len() {
                return Err(Error::dim("adamw", store.get(id).shape(), &[g.len()]));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient for '{}'", store.name(id))));
            }
        }

        self.t += 1;
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let shrink = 1.0 - lr * weight_decay;
        for (((theta, g), m), v) in store.tensors_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &gi), mi), vi) in theta.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p = *p * shrink - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn store(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("theta", Tensor::scalar(v));
        s
    }

    fn no_decay() -> AdamWConfig {
        AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_no_decay_is_fixed_point() {
        let mut s = store(1.7);
        let mut opt = AdamWState::new(&s, no_decay());
        for _ in 0..5 {
            opt.step(&mut s, &[vec![0.0]], 0.1).unwrap();
        }
        assert_eq!(s.get(crate::autodiff::ParamId(0)).item(), 1.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store(1.0);
        let mut opt = AdamWState::new(&s, no_decay());
        opt.step(&mut s, &[vec![1.0]], 0.1).unwrap();
        let theta = s.get(crate::autodiff::ParamId(0)).item();
        assert!((theta - 0.9).abs() < 1e-8, "{theta}");
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn decoupled_decay_is_geometric() {
        let mut s = store(2.0);
        let mut opt = AdamWState::new(&s, AdamWConfig::default());
        let lr = 0.05;
        let mut expect = 2.0;
        for _ in 0..50 {
            opt.step(&mut s, &[vec![0.0]], lr).unwrap();
            expect *= 1.0 - lr * 1e-4;
            assert_eq!(s.get(crate::autodiff::ParamId(0)).item(), expect);
        }
    }

    #[test]
    fn refuses_non_finite_gradient() {
        let mut s = store(1.0);
        let mut opt = AdamWState::new(&s, AdamWConfig::default());
        assert!(matches!(opt.step(&mut s, &[vec![f64::NAN]], 0.1), Err(Error::Numeric(_))));
        assert_eq!(opt.steps(), 0);
        assert_eq!(s.get(crate::autodiff::ParamId(0)).item(), 1.0);
    }
}
