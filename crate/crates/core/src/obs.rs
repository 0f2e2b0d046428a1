//! Observation channels, transitions and the masking primitives.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::rng::RngStream;

/// Which observation channel a sample is consumed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Full,
    Partial,
}

impl Channel {
    /// History flag: 1 for full state information, 0 for partial.
    pub fn flag(self) -> f64 {
        match self {
            Channel::Full => 1.0,
            Channel::Partial => 0.0,
        }
    }
}

/// Both views of one environment observation.
///
/// `full` exposes the true state; `partial` is what is available at test
/// time (masked dimensions set to zero, or noisy). The two always have the
/// same length so policy inputs keep one shape across regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPair {
    pub full: Vec<f64>,
    pub partial: Vec<f64>,
}

impl ObservationPair {
    pub fn new(full: Vec<f64>, partial: Vec<f64>) -> Self {
        assert_eq!(
            full.len(),
            partial.len(),
            "full and partial channels must have equal dimensionality"
        );
        Self { full, partial }
    }

    /// A pair whose partial view equals the full view.
    pub fn fully_observed(full: Vec<f64>) -> Self {
        let partial = full.clone();
        Self { full, partial }
    }

    pub fn dim(&self) -> usize {
        self.full.len()
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Full => &self.full,
            Channel::Partial => &self.partial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    pub fn index(&self) -> Option<usize> {
        match self {
            Action::Discrete(i) => Some(*i),
            Action::Continuous(_) => None,
        }
    }
}

/// One environment step as collected, carrying both observation channels.
///
/// `obs` is the observation the action was chosen from.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSample {
    pub obs: ObservationPair,
    pub action: Action,
    pub reward: f64,
    /// Episode ended on this step (terminal or time limit).
    pub done: bool,
    /// Episode ended because of the time limit rather than a terminal state.
    pub truncated: bool,
    pub episode_id: u64,
    pub step_index: u64,
}

fn check_dims(dim: usize, mask_dims: &BTreeSet<usize>) -> Result<()> {
    if let Some(&bad) = mask_dims.iter().find(|&&d| d >= dim) {
        return config(format!(
            "mask dimension {bad} out of range for observation of length {dim}"
        ));
    }
    Ok(())
}

/// Copy of `full` with every index in `mask_dims` overwritten by zero.
pub fn mask_observation(full: &[f64], mask_dims: &BTreeSet<usize>) -> Result<Vec<f64>> {
    check_dims(full.len(), mask_dims)?;
    let mut out = full.to_vec();
    for &d in mask_dims {
        out[d] = 0.0;
    }
    Ok(out)
}

/// `full + e` with `e[d] ~ Normal(mu, sigma)` drawn independently per dimension.
pub fn apply_gaussian_noise(
    full: &[f64],
    mu: f64,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return config(format!("noise sigma must be finite and >= 0, got {sigma}"));
    }
    if !mu.is_finite() {
        return config(format!("noise mu must be finite, got {mu}"));
    }
    Ok(full.iter().map(|&x| x + rng.normal(mu, sigma)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ix: &[usize]) -> BTreeSet<usize> {
        ix.iter().copied().collect()
    }

    #[test]
    fn masking_examples() {
        assert_eq!(
            mask_observation(&[1.0, 2.0, 3.0], &set(&[1])).unwrap(),
            vec![1.0, 0.0, 3.0]
        );
        assert_eq!(
            mask_observation(&[1.0, 2.0], &set(&[])).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(
            mask_observation(&[0.0, 0.0], &set(&[0, 1])).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn mask_index_out_of_range_is_config_error() {
        let err = mask_observation(&[1.0, 2.0], &set(&[2])).unwrap_err();
        assert!(matches!(err, crate::Error::Config(_)));
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut rng = RngStream::new(1, "noise");
        let v = vec![0.5, -1.25, 3.0];
        assert_eq!(apply_gaussian_noise(&v, 0.0, 0.0, &mut rng).unwrap(), v);
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = RngStream::new(1, "noise");
        assert!(matches!(
            apply_gaussian_noise(&[1.0], 0.0, -0.1, &mut rng),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn noise_is_deterministic_per_stream() {
        let v = vec![1.0; 16];
        let a = apply_gaussian_noise(&v, 0.0, 0.3, &mut RngStream::new(42, "noise")).unwrap();
        let b = apply_gaussian_noise(&v, 0.0, 0.3, &mut RngStream::new(42, "noise")).unwrap();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn noise_moments_match_configuration() {
        // 10^6 draws: SE of the mean is 0.3e-3, SE of the std is ~0.21e-3,
        // so the 0.001 / 0.002 bounds sit at more than 3 SE.
        let mut rng = RngStream::new(7, "noise");
        let n = 1_000_000;
        let v = vec![0.0; n];
        let e = apply_gaussian_noise(&v, 0.0, 0.3, &mut rng).unwrap();
        let mean = e.iter().sum::<f64>() / n as f64;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.001, "mean {mean}");
        assert!((var.sqrt() - 0.3).abs() < 0.002, "std {}", var.sqrt());
    }

    proptest! {
        #[test]
        fn masking_is_idempotent_and_identity_off_mask(
            v in proptest::collection::vec(-1e6f64..1e6, 1..20),
            raw in proptest::collection::vec(0usize..20, 0..10),
        ) {
            let mask: BTreeSet<usize> = raw.into_iter().filter(|&d| d < v.len()).collect();
            let once = mask_observation(&v, &mask).unwrap();
            let twice = mask_observation(&once, &mask).unwrap();
            prop_assert_eq!(&once, &twice);
            for d in 0..v.len() {
                if mask.contains(&d) {
                    prop_assert_eq!(once[d], 0.0);
                } else {
                    prop_assert_eq!(once[d], v[d]);
                }
            }
        }
    }
}
