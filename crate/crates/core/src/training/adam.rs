use serde::{Deserialize, Serialize};

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
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, n: usize) -> Self {
        Adam { config, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Applies one update. A non-finite gradient aborts before anything changes; `name`
    /// maps the offending index to a parameter name for the error.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], name: impl Fn(usize) -> String) -> Result<()> {
        if params.len() != grads.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam: {} params, {} grads, {} moments",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(name(i)));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut a = Adam::new(AdamConfig::default(), 3);
        let mut p = vec![1.0, -2.0, 3.0];
        a.step(&mut p, &[0.0; 3], |i| i.to_string()).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut a = Adam::new(cfg, 3);
        let mut p = vec![0.0; 3];
        let g = [0.5, -3.0, 1e-3];
        a.step(&mut p, &g, |i| i.to_string()).unwrap();
        // at t = 1: m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε)
        for (d, gi) in p.iter().zip(&g) {
            let expect = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((d - expect).abs() < 1e-18);
            assert!(d.abs() <= cfg.lr);
        }
    }

    #[test]
    fn quadratic_converges() {
        let mut a = Adam::new(AdamConfig { lr: 0.01, ..Default::default() }, 1);
        let mut p = vec![1.0];
        for _ in 0..500 {
            let g = [2.0 * p[0]];
            a.step(&mut p, &g, |_| "theta".into()).unwrap();
        }
        assert!(p[0] * p[0] < 1e-3, "f = {}", p[0] * p[0]);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut a = Adam::new(AdamConfig::default(), 2);
        let mut p = vec![0.0; 2];
        let err = a.step(&mut p, &[0.0, f64::NAN], |i| format!("w[{i}]")).unwrap_err();
        assert_eq!(err.to_string(), "non-finite gradient in parameter w[1]");
        assert_eq!(a.t, 0);
    }
}
