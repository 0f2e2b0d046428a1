//! POMDP environments that emit both a full and a partial observation channel.

mod lander;
mod rocksample;
mod wrappers;

pub use lander::{BlindLander, BlindLanderConfig, LanderState, VELOCITY_DIMS};
pub use rocksample::{RockSample, RockSampleConfig, RockSampleAction};
pub use wrappers::{Masked, Noisy};

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::obs::{Action, ObservationPair};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    Discrete(usize),
    Continuous { dim: usize, low: f64, high: f64 },
}

impl ActionSpace {
    /// Width of the action encoding used in history frames.
    pub fn encoding_dim(&self) -> usize {
        match self {
            ActionSpace::Discrete(n) => *n,
            ActionSpace::Continuous { dim, .. } => *dim,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }

    /// Checks that `action` belongs to this space. Continuous actions may lie
    /// outside `[low, high]`; environments clip them.
    pub fn validate(&self, action: &Action) -> Result<()> {
        match (self, action) {
            (ActionSpace::Discrete(n), Action::Discrete(i)) if i < n => Ok(()),
            (ActionSpace::Discrete(n), Action::Discrete(i)) => {
                crate::error::usage(format!("action {i} out of range for {n} discrete actions"))
            }
            (ActionSpace::Continuous { dim, .. }, Action::Continuous(v)) if v.len() == *dim => {
                if v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    crate::error::usage("continuous action contains non-finite values")
                }
            }
            _ => crate::error::usage(format!("action {action:?} does not match space {self:?}")),
        }
    }

    /// One-hot for discrete actions, clipped values for continuous ones.
    pub fn encode(&self, action: &Action) -> Vec<f64> {
        match (self, action) {
            (ActionSpace::Discrete(n), Action::Discrete(i)) => {
                let mut v = vec![0.0; *n];
                v[*i] = 1.0;
                v
            }
            (ActionSpace::Continuous { low, high, .. }, Action::Continuous(v)) => {
                v.iter().map(|x| x.clamp(*low, *high)).collect()
            }
            _ => panic!("action {action:?} does not match space {self:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_space: ActionSpace,
    pub discount: f64,
    pub max_episode_steps: usize,
    /// Real-valued observations that admit additive noise.
    pub continuous_observations: bool,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 {
            return config("obs_dim must be > 0");
        }
        match self.action_space {
            ActionSpace::Discrete(n) if n < 2 => return config("need at least 2 discrete actions"),
            ActionSpace::Continuous { dim: 0, .. } => return config("continuous action dim must be >= 1"),
            ActionSpace::Continuous { low, high, .. } if !(low < high) => {
                return config("continuous action bounds must satisfy low < high")
            }
            _ => {}
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return config(format!("discount must lie in (0, 1], got {}", self.discount));
        }
        if self.max_episode_steps == 0 {
            return config("max_episode_steps must be > 0");
        }
        Ok(())
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub obs: ObservationPair,
    pub reward: f64,
    /// A terminal state was reached.
    pub terminal: bool,
    /// The episode hit `max_episode_steps` without terminating.
    pub truncated: bool,
}

impl Step {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// A partially observable environment with paired observation channels.
///
/// Environments draw every random quantity from the stream passed in, so a
/// run is reproducible from its seeds alone.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode.
    fn reset(&mut self, rng: &mut RngStream) -> ObservationPair;

    /// Advances the episode. Fails with a usage error for invalid actions or
    /// when called after the episode ended.
    fn step(&mut self, action: &Action, rng: &mut RngStream) -> Result<Step>;

    fn name(&self) -> String;
}

impl Environment for Box<dyn Environment> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }
    fn reset(&mut self, rng: &mut RngStream) -> ObservationPair {
        (**self).reset(rng)
    }
    fn step(&mut self, action: &Action, rng: &mut RngStream) -> Result<Step> {
        (**self).step(action, rng)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Serializable description of an environment, as found in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(flatten)]
    pub base: BaseEnvConfig,
    /// Replace the partial channel by `full + Normal(mu, sigma)` noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    /// Replace the partial channel by the full channel with these dims zeroed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_dims: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum BaseEnvConfig {
    #[serde(rename = "rocksample")]
    RockSample(RockSampleConfig),
    BlindLander(BlindLanderConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    #[serde(default)]
    pub mu: f64,
    pub sigma: f64,
}

impl EnvConfig {
    pub fn rocksample(grid_size: usize, rock_count: usize) -> Self {
        Self::from_base(BaseEnvConfig::RockSample(RockSampleConfig::new(grid_size, rock_count)))
    }

    pub fn blind_lander() -> Self {
        Self::from_base(BaseEnvConfig::BlindLander(BlindLanderConfig::default()))
    }

    pub fn noisy_lander(mu: f64, sigma: f64) -> Self {
        Self {
            noise: Some(NoiseConfig { mu, sigma }),
            ..Self::blind_lander()
        }
    }

    pub fn from_base(base: BaseEnvConfig) -> Self {
        Self {
            base,
            noise: None,
            mask_dims: None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        let mut env: Box<dyn Environment> = match &self.base {
            BaseEnvConfig::RockSample(c) => Box::new(RockSample::new(c.clone())?),
            BaseEnvConfig::BlindLander(c) => Box::new(BlindLander::new(c.clone())?),
        };
        if let Some(dims) = &self.mask_dims {
            env = Box::new(Masked::new(env, dims.iter().copied().collect())?);
        }
        if let Some(n) = &self.noise {
            env = Box::new(Noisy::new(env, n.mu, n.sigma)?);
        }
        Ok(env)
    }

    /// Parses shorthands used on the command line: `rocksample:4:4`,
    /// `blind_lander`, `noisy_lander`.
    pub fn from_shorthand(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["rocksample", n, k] => {
                let n = n.parse().map_err(|_| crate::Error::Parse(format!("bad grid size in {s}")))?;
                let k = k.parse().map_err(|_| crate::Error::Parse(format!("bad rock count in {s}")))?;
                Ok(Self::rocksample(n, k))
            }
            ["blind_lander"] => Ok(Self::blind_lander()),
            ["noisy_lander"] => Ok(Self::noisy_lander(0.0, 0.3)),
            _ => Err(crate::Error::Parse(format!(
                "unknown environment '{s}' (expected rocksample:N:K, blind_lander or noisy_lander)"
            ))),
        }
    }
}

/// Discounted return `sum_t gamma^t r_t` of one episode's rewards.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let good = EnvSpec {
            obs_dim: 3,
            action_space: ActionSpace::Discrete(2),
            discount: 0.95,
            max_episode_steps: 10,
            continuous_observations: false,
        };
        assert!(good.validate().is_ok());
        let mut bad = good.clone();
        bad.discount = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.action_space = ActionSpace::Discrete(1);
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.obs_dim = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn env_config_round_trips_through_toml() {
        let cfg = EnvConfig::noisy_lander(0.0, 0.3);
        let text = toml::to_string(&cfg).unwrap();
        let back: EnvConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);

        let rs: EnvConfig = toml::from_str("name = \"rocksample\"\ngrid_size = 4\nrock_count = 4\n").unwrap();
        assert_eq!(rs, EnvConfig::rocksample(4, 4));
    }

    #[test]
    fn shorthands() {
        assert_eq!(EnvConfig::from_shorthand("rocksample:2:1").unwrap(), EnvConfig::rocksample(2, 1));
        assert!(EnvConfig::from_shorthand("tiger").is_err());
    }

    #[test]
    fn discounted_return_matches_definition() {
        let r = [1.0, 0.0, 2.0];
        assert!((discounted_return(&r, 0.5) - (1.0 + 0.25 * 2.0)).abs() < 1e-15);
    }
}
