//! Adam with bias correction over the flat parameter buffer.

use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Gradients, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(num_values: usize) -> Self {
        Self::with_config(num_values, AdamConfig::default())
    }

    pub fn with_config(num_values: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; num_values], v: vec![0.0; num_values], t: 0 }
    }

    /// One update of `params` in place. Rejects non-finite gradients before
    /// touching any state.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, learning_rate: f64) -> Result<()> {
        let g = grads.as_flat();
        if g.len() != self.m.len() || params.num_values() != self.m.len() {
            return Err(Error::Shape {
                node: "adam".into(),
                detail: alloc::format!(
                    "state holds {} moments, params {}, gradients {}",
                    self.m.len(),
                    params.num_values(),
                    g.len()
                ),
            });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            let (id, idx) = params.locate(i).expect("index in range");
            return Err(Error::NonFinite { location: alloc::format!("gradient of `{}`[{idx}]", params.name(id)) });
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let bc1 = 1.0 - libm::pow(beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(beta2, self.t as f64);
        for (((p, gi), m), v) in params.as_flat_mut().iter_mut().zip(g).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * gi;
            *v = beta2 * *v + (1.0 - beta2) * gi * gi;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (libm::sqrt(v_hat) + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> (ParamStore, crate::autodiff::ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("theta", 1, 1, vec![v]).unwrap();
        (s, id)
    }

    #[test]
    fn zero_gradient_is_stationary() {
        let (mut s, id) = scalar_store(0.7);
        let mut adam = AdamState::new(1);
        let g = Gradients::zeros(&s);
        adam.step(&mut s, &g, 1e-3).unwrap();
        assert_eq!(s.value(id), &[0.7]);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn constant_unit_gradient_two_steps() {
        let (mut s, id) = scalar_store(0.0);
        let mut adam = AdamState::new(1);
        let mut g = Gradients::zeros(&s);
        g.get_mut(id)[0] = 1.0;
        adam.step(&mut s, &g, 1e-3).unwrap();
        // m_hat = v_hat = 1 after bias correction
        let one = -1e-3 / (1.0 + 1e-8);
        assert!((s.value(id)[0] - one).abs() < 1e-18);
        adam.step(&mut s, &g, 1e-3).unwrap();
        assert!((s.value(id)[0] - 2.0 * one).abs() < 1e-15);
    }

    #[test]
    fn sign_flip_flips_update() {
        let (mut a, id) = scalar_store(0.0);
        let (mut b, _) = scalar_store(0.0);
        let (mut sa, mut sb) = (AdamState::new(1), AdamState::new(1));
        let mut ga = Gradients::zeros(&a);
        let mut gb = Gradients::zeros(&b);
        for g in [0.3, -1.2, 5.0] {
            ga.get_mut(id)[0] = g;
            gb.get_mut(id)[0] = -g;
            sa.step(&mut a, &ga, 1e-2).unwrap();
            sb.step(&mut b, &gb, 1e-2).unwrap();
            assert_eq!(a.value(id)[0], -b.value(id)[0]);
        }
    }

    #[test]
    fn non_finite_gradient_named() {
        let (mut s, id) = scalar_store(0.0);
        let mut adam = AdamState::new(1);
        let mut g = Gradients::zeros(&s);
        g.get_mut(id)[0] = f64::NAN;
        let err = adam.step(&mut s, &g, 1e-3).unwrap_err();
        assert_eq!(err, Error::NonFinite { location: "gradient of `theta`[0]".into() });
        assert_eq!(adam.t, 0);
    }
}
