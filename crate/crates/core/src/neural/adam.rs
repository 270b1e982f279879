use serde::{Deserialize, Serialize};

use super::Scalar;
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
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Adam with bias-corrected moment estimates, one moment pair per tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, tensor_lens: &[usize]) -> Self {
        Self {
            cfg,
            t: 0,
            m: tensor_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: tensor_lens.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(format!(
                "optimizer tracks {} tensors, given {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::shape(format!("tensor {i}: expected {} values", self.m[i].len())));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let t = self.t as i32;
        let c1 = T::lit(1.0 / (1.0 - beta1.powi(t)));
        let c2 = T::lit(1.0 / (1.0 - beta2.powi(t)));
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let (a1, a2) = (T::lit(1.0 - beta1), T::lit(1.0 - beta2));
        let (lr, eps) = (T::lit(lr), T::lit(eps));
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + a1 * g;
                *v = b2 * *v + a2 * g * g;
                let m_hat = *m * c1;
                let v_hat = *v * c2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::<f64>::new(AdamConfig::default(), &[1]);
        let mut p = [0.5f64];
        adam.step(&mut [&mut p[..]], &[&[1.0]]).unwrap();
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        let expected = 0.5 - 1e-4 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut adam = Adam::<f32>::new(AdamConfig::default(), &[3]);
        let mut p = [1.0f32, -2.0, 3.0];
        adam.step(&mut [&mut p[..]], &[&[0.0; 3]]).unwrap();
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn two_steps_match_literal_equations() {
        let cfg = AdamConfig::with_lr(0.01);
        let mut adam = Adam::<f64>::new(cfg, &[2]);
        let mut p = [1.0f64, -1.0];
        let g = [0.3f64, -0.7];
        adam.step(&mut [&mut p[..]], &[&g]).unwrap();
        adam.step(&mut [&mut p[..]], &[&g]).unwrap();

        let mut q = [1.0f64, -1.0];
        let (mut m, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        for t in 1..=2 {
            for i in 0..2 {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
                let mh = m[i] / (1.0 - 0.9f64.powi(t));
                let vh = v[i] / (1.0 - 0.999f64.powi(t));
                q[i] -= 0.01 * mh / (vh.sqrt() + 1e-8);
            }
        }
        for i in 0..2 {
            assert!((p[i] - q[i]).abs() < 1e-14);
        }
        assert!(adam.second_moments()[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let mut adam = Adam::<f32>::new(AdamConfig::with_lr(0.0), &[2]);
        let mut p = [0.25f32, 4.0];
        for _ in 0..5 {
            adam.step(&mut [&mut p[..]], &[&[1.0, -3.0]]).unwrap();
        }
        assert_eq!(p, [0.25, 4.0]);
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::<f32>::new(AdamConfig::default(), &[2]);
        let mut p = [0.0f32; 3];
        assert!(matches!(adam.step(&mut [&mut p[..]], &[&[0.0; 3]]), Err(Error::Shape(_))));
        assert_eq!(adam.steps(), 0);
    }
}
