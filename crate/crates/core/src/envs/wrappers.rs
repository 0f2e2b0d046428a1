//! Channel-rewriting wrappers. Both leave the full channel and the dynamics
//! of the wrapped environment untouched.

use std::collections::BTreeSet;

use super::{EnvSpec, Environment, Step};
use crate::error::{config, Result};
use crate::obs::{apply_gaussian_noise, mask_observation, Action, ObservationPair};
use crate::rng::RngStream;

/// Partial channel becomes `full + Normal(mu, sigma)` on every dimension.
///
/// Noise is drawn from the step's stream on every step, whichever channel
/// the consumer later reads, so stream consumption does not depend on the
/// training regime.
pub struct Noisy<E> {
    inner: E,
    mu: f64,
    sigma: f64,
}

impl<E: Environment> Noisy<E> {
    pub fn new(inner: E, mu: f64, sigma: f64) -> Result<Self> {
        if !inner.spec().continuous_observations {
            return config(format!(
                "{} has discrete observations; additive noise is undefined",
                inner.name()
            ));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return config(format!("invalid noise parameters mu={mu}, sigma={sigma}"));
        }
        Ok(Self { inner, mu, sigma })
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    fn rewrite(&self, obs: ObservationPair, rng: &mut RngStream) -> Result<ObservationPair> {
        let partial = apply_gaussian_noise(&obs.full, self.mu, self.sigma, rng)?;
        Ok(ObservationPair::new(obs.full, partial))
    }
}

impl<E: Environment> Environment for Noisy<E> {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, rng: &mut RngStream) -> ObservationPair {
        let obs = self.inner.reset(rng);
        self.rewrite(obs, rng).expect("noise parameters validated at construction")
    }

    fn step(&mut self, action: &Action, rng: &mut RngStream) -> Result<Step> {
        let step = self.inner.step(action, rng)?;
        Ok(Step {
            obs: self.rewrite(step.obs, rng)?,
            ..step
        })
    }

    fn name(&self) -> String {
        format!("Noisy({}, mu={}, sigma={})", self.inner.name(), self.mu, self.sigma)
    }
}

/// Partial channel becomes the full channel with `mask_dims` zeroed.
pub struct Masked<E> {
    inner: E,
    mask_dims: BTreeSet<usize>,
}

impl<E: Environment> Masked<E> {
    pub fn new(inner: E, mask_dims: BTreeSet<usize>) -> Result<Self> {
        let dim = inner.spec().obs_dim;
        if let Some(&d) = mask_dims.iter().find(|&&d| d >= dim) {
            return config(format!("mask dimension {d} out of range for obs_dim {dim}"));
        }
        Ok(Self { inner, mask_dims })
    }

    pub fn mask_dims(&self) -> &BTreeSet<usize> {
        &self.mask_dims
    }

    fn rewrite(&self, obs: ObservationPair) -> ObservationPair {
        let partial = mask_observation(&obs.full, &self.mask_dims).expect("dims validated");
        ObservationPair::new(obs.full, partial)
    }
}

impl<E: Environment> Environment for Masked<E> {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, rng: &mut RngStream) -> ObservationPair {
        let obs = self.inner.reset(rng);
        self.rewrite(obs)
    }

    fn step(&mut self, action: &Action, rng: &mut RngStream) -> Result<Step> {
        let step = self.inner.step(action, rng)?;
        Ok(Step {
            obs: self.rewrite(step.obs),
            ..step
        })
    }

    fn name(&self) -> String {
        format!("Masked({}, {:?})", self.inner.name(), self.mask_dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::lander::VELOCITY_DIMS;
    use crate::envs::{BlindLander, BlindLanderConfig, RockSample, RockSampleConfig};

    fn lander() -> BlindLander {
        BlindLander::new(BlindLanderConfig::default()).unwrap()
    }

    fn random_episode<E: Environment>(env: &mut E, seed: u64) -> Vec<ObservationPair> {
        let mut env_rng = RngStream::new(seed, "env");
        let mut act_rng = RngStream::new(seed, "policy");
        let mut out = vec![env.reset(&mut env_rng)];
        loop {
            let a = Action::Continuous(vec![act_rng.normal(0.0, 1.0), act_rng.normal(0.0, 0.5)]);
            let s = env.step(&a, &mut env_rng).unwrap();
            out.push(s.obs.clone());
            if s.done() {
                return out;
            }
        }
    }

    #[test]
    fn zero_sigma_noise_copies_full_channel() {
        let mut env = Noisy::new(lander(), 0.0, 0.0).unwrap();
        for obs in random_episode(&mut env, 3) {
            assert_eq!(obs.full, obs.partial);
        }
    }

    #[test]
    fn noise_rejects_negative_sigma_and_discrete_observations() {
        assert!(Noisy::new(lander(), 0.0, -1.0).is_err());
        let rs = RockSample::new(RockSampleConfig::new(4, 4)).unwrap();
        assert!(Noisy::new(rs, 0.0, 0.3).is_err());
    }

    #[test]
    fn wrappers_preserve_spec() {
        let base = lander().spec().clone();
        assert_eq!(Noisy::new(lander(), 0.0, 0.3).unwrap().spec(), &base);
        assert_eq!(Masked::new(lander(), [2, 3].into()).unwrap().spec(), &base);
    }

    #[test]
    fn noise_residual_std_matches_sigma() {
        let mut env = Noisy::new(lander(), 0.0, 0.3).unwrap();
        let mut residuals = vec![Vec::new(); 4];
        let mut seed = 0;
        while residuals[0].len() < 250_000 {
            for obs in random_episode(&mut env, seed) {
                for d in 0..4 {
                    residuals[d].push(obs.partial[d] - obs.full[d]);
                }
            }
            seed += 1;
        }
        for r in residuals {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let std = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!(mean.abs() < 0.003, "mean {mean}");
            assert!((std - 0.3).abs() < 0.003, "std {std}");
        }
    }

    #[test]
    fn empty_and_total_masks() {
        let mut env = Masked::new(lander(), BTreeSet::new()).unwrap();
        for obs in random_episode(&mut env, 1) {
            assert_eq!(obs.full, obs.partial);
        }
        let mut env = Masked::new(lander(), (0..4).collect()).unwrap();
        for obs in random_episode(&mut env, 1) {
            assert!(obs.partial.iter().all(|&v| v == 0.0));
        }
        assert!(Masked::new(lander(), [4].into()).is_err());
    }

    #[test]
    fn velocity_mask_keeps_positions_consistent() {
        let mut env = Masked::new(lander(), VELOCITY_DIMS.into()).unwrap();
        for seed in 0..20 {
            for obs in random_episode(&mut env, seed) {
                assert_eq!(obs.partial[0], obs.full[0]);
                assert_eq!(obs.partial[1], obs.full[1]);
                assert_eq!(obs.partial[2], 0.0);
                assert_eq!(obs.partial[3], 0.0);
            }
        }
    }
}
