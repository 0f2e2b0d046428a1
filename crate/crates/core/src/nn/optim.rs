use serde::{Deserialize, Serialize};

use crate::error::{config, usage, Result};
use crate::nn::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer state for one flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    step_size: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, step_size: f64, num_params: usize) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return config(format!("step size must be positive, got {step_size}"));
        }
        let moments = if kind == OptimizerKind::Adam { num_params } else { 0 };
        Ok(Self {
            kind,
            step_size,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        })
    }

    pub fn sgd(step_size: f64, num_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, step_size, num_params)
    }

    pub fn adam(step_size: f64, num_params: usize) -> Result<Self> {
        Self::new(OptimizerKind::Adam, step_size, num_params)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One descent step on `net` along `grads`.
    pub fn step(&mut self, net: &mut Mlp, grads: &[f64]) -> Result<()> {
        self.step_slice(net.params_mut(), grads)
    }

    /// One descent step on a raw parameter slice (e.g. a log-std vector).
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return usage(format!(
                "gradient length {} does not match parameter length {}",
                grads.len(),
                params.len()
            ));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= self.step_size * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    return usage(format!(
                        "optimizer was built for {} parameters, got {}",
                        self.m.len(),
                        params.len()
                    ));
                }
                self.t += 1;
                let t = self.t as i32;
                let bc1 = 1.0 - self.beta1.powi(t);
                let bc2 = 1.0 - self.beta2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    params[i] -= self.step_size * m_hat / (v_hat.sqrt() + self.eps);
                }
                return Ok(());
            }
        }
        self.t += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::nn::Activation;

    fn net() -> Mlp {
        Mlp::from_params(&[1, 1], Activation::Tanh, Activation::Identity, vec![1.0, -2.0]).unwrap()
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut n = net();
        let mut opt = Optimizer::sgd(0.1, n.num_params()).unwrap();
        opt.step(&mut n, &[0.5, -1.0]).unwrap();
        assert!((n.params()[0] - 0.95).abs() < 1e-15);
        assert!((n.params()[1] + 1.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_step_size() {
        for g in [1e-4, 0.3, 250.0] {
            let mut n = net();
            let mut opt = Optimizer::adam(3e-4, n.num_params()).unwrap();
            opt.step(&mut n, &[g, -g]).unwrap();
            // eps in the denominator shaves a relative g/(g+eps) off tiny gradients.
            assert!(((1.0 - n.params()[0]) / 3e-4 - 1.0).abs() < 1e-3, "g={g}");
            assert!(((n.params()[1] + 2.0) / 3e-4 - 1.0).abs() < 1e-3, "g={g}");
        }
    }

    #[test]
    fn zero_gradient_is_noop() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut n = net();
            let mut opt = Optimizer::new(kind, 0.1, n.num_params()).unwrap();
            opt.step(&mut n, &[0.0, 0.0]).unwrap();
            assert_eq!(n.params(), &[1.0, -2.0]);
        }
    }

    #[test]
    fn shape_mismatch_and_bad_step_size() {
        let mut n = net();
        let mut opt = Optimizer::adam(0.1, n.num_params()).unwrap();
        assert!(matches!(opt.step(&mut n, &[1.0]), Err(Error::Usage(_))));
        assert!(matches!(Optimizer::sgd(0.0, 2), Err(Error::Config(_))));
    }
}
