//! Action distributions used by the policy heads.

use std::f64::consts::PI;

use crate::rng::RngStream;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Categorical distribution over action indices.
#[derive(Debug, Clone)]
pub struct Categorical {
    log_probs: Vec<f64>,
    probs: Vec<f64>,
}

pub fn categorical_policy_head(logits: &[f64]) -> Categorical {
    let log_probs = log_softmax(logits);
    let probs = log_probs.iter().map(|l| l.exp()).collect();
    Categorical { log_probs, probs }
}

impl Categorical {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
            .sum::<f64>()
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// d log p(action) / d logits.
    pub fn grad_log_prob(&self, action: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs.iter().map(|p| -p).collect();
        g[action] += 1.0;
        g
    }

    /// d entropy / d logits.
    pub fn grad_entropy(&self) -> Vec<f64> {
        let h = self.entropy();
        self.probs
            .iter()
            .zip(&self.log_probs)
            .map(|(p, l)| -p * (l + h))
            .collect()
    }
}

/// Diagonal Gaussian with a state-independent log standard deviation.
#[derive(Debug, Clone)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    log_std: Vec<f64>,
}

pub fn gaussian_policy_head(mean: &[f64], log_std: &[f64]) -> DiagGaussian {
    assert_eq!(mean.len(), log_std.len(), "mean and log_std dimensions differ");
    DiagGaussian {
        mean: mean.to_vec(),
        log_std: log_std.to_vec(),
    }
}

impl DiagGaussian {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    pub fn log_prob(&self, action: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(action)
            .map(|((m, ls), a)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| 0.5 * (1.0 + (2.0 * PI).ln() + 2.0 * ls))
            .sum()
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.standard_normal())
            .collect()
    }

    /// (d log p / d mean, d log p / d log_std).
    pub fn grad_log_prob(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dm = Vec::with_capacity(self.mean.len());
        let mut ds = Vec::with_capacity(self.mean.len());
        for ((m, ls), a) in self.mean.iter().zip(&self.log_std).zip(action) {
            let std = ls.exp();
            let z = (a - m) / std;
            dm.push(z / std);
            ds.push(z * z - 1.0);
        }
        (dm, ds)
    }
}
