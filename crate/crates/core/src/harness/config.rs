use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agents::{BatchAgentConfig, ReplayAgentConfig};
use crate::envs::{ActionSpace, EnvConfig};
use crate::error::{config, Error, Result};
use crate::guidance::{GuidanceConfig, MixingMode};

/// Which observation channel(s) training consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Full,
    Partial,
    Guided,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Full => "full",
            Regime::Partial => "partial",
            Regime::Guided => "guided",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Regime::Full),
            "partial" => Ok(Regime::Partial),
            "guided" => Ok(Regime::Guided),
            other => Err(Error::Parse(format!("unknown regime '{other}' (full, partial, guided)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentConfig {
    Batch(BatchAgentConfig),
    Replay(ReplayAgentConfig),
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig::Batch(BatchAgentConfig::default())
    }
}

impl AgentConfig {
    pub fn default_mixing_mode(&self) -> MixingMode {
        match self {
            AgentConfig::Batch(_) => MixingMode::Batch,
            AgentConfig::Replay(_) => MixingMode::PerSample,
        }
    }

    /// Environment steps per training iteration.
    pub fn steps_per_iteration(&self, space: &ActionSpace) -> u64 {
        match self {
            AgentConfig::Batch(b) => b.batch_size(space) as u64,
            AgentConfig::Replay(r) => r.steps_per_iteration,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_horizon() -> usize {
    4
}

fn default_timesteps() -> u64 {
    300_000
}

/// A complete experiment description, normally read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub guidance: Option<GuidanceConfig>,
    pub regime: Regime,
    #[serde(default = "default_timesteps")]
    pub total_timesteps: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Where per-seed files go; nothing is written when unset.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Fill the wall_clock_s column. Off by default so reruns produce
    /// byte-identical files.
    #[serde(default)]
    pub record_wall_clock: bool,
    /// Worker threads for seed-level parallelism (0: one per core).
    #[serde(default)]
    pub threads: usize,
}

impl RunConfig {
    pub fn new(env: EnvConfig, agent: AgentConfig, regime: Regime) -> Self {
        Self {
            env,
            agent,
            guidance: (regime == Regime::Guided).then(GuidanceConfig::default),
            regime,
            total_timesteps: default_timesteps(),
            seeds: default_seeds(),
            horizon: default_horizon(),
            output_dir: None,
            record_wall_clock: false,
            threads: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Guidance settings in effect (defaults when a guided run omits them).
    pub fn guidance(&self) -> GuidanceConfig {
        self.guidance.clone().unwrap_or_default()
    }

    pub fn action_space(&self) -> Result<ActionSpace> {
        Ok(self.env.build()?.spec().action_space.clone())
    }

    pub fn steps_per_iteration(&self) -> Result<u64> {
        Ok(self.agent.steps_per_iteration(&self.action_space()?))
    }

    /// `total_timesteps / steps_per_iteration`, rounded down.
    pub fn iterations(&self) -> Result<u64> {
        Ok(self.total_timesteps / self.steps_per_iteration()?)
    }

    /// Checks everything that can be checked without training.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return config("at least one seed is required");
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return config(format!("seeds must be distinct, got {:?}", self.seeds));
        }
        let env = self.env.build()?;
        let space = env.spec().action_space.clone();
        match &self.agent {
            AgentConfig::Batch(b) => b.validate()?,
            AgentConfig::Replay(r) => r.validate()?,
        }
        if self.regime == Regime::Guided && self.guidance.is_none() {
            return config("regime = \"guided\" requires a [guidance] table");
        }
        if let Some(g) = &self.guidance {
            g.validate()?;
            if matches!(self.agent, AgentConfig::Replay(_)) && g.mode == Some(MixingMode::Batch) {
                return config("replay agents mix at insertion time; use guidance.mode = \"per_sample\"");
            }
        }
        let per_iter = self.agent.steps_per_iteration(&space);
        if self.total_timesteps < per_iter {
            return config(format!(
                "total_timesteps ({}) is smaller than one iteration ({per_iter} steps)",
                self.total_timesteps
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
regime = "guided"
total_timesteps = 20000
seeds = [0, 1, 2]
horizon = 4

[env]
name = "rocksample"
grid_size = 4
rock_count = 4

[agent]
kind = "batch"
timesteps_per_batch = 1000

[guidance]
nmix_fraction = 0.5
selection = "prefix"
"#;

    #[test]
    fn parses_example() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.regime, Regime::Guided);
        assert_eq!(cfg.iterations().unwrap(), 20);
        assert_eq!(cfg.guidance().nmix_iterations(20), Some(10));
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn infinite_fraction_parses() {
        let text = EXAMPLE.replace("nmix_fraction = 0.5", "nmix_fraction = inf");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.guidance().nmix_iterations(20), None);
    }

    #[test]
    fn rejects_bad_configs() {
        let dup = EXAMPLE.replace("seeds = [0, 1, 2]", "seeds = [1, 1]");
        assert!(matches!(RunConfig::from_toml(&dup), Err(Error::Config(_))));
        let no_guidance = EXAMPLE.split("[guidance]").next().unwrap().to_string();
        assert!(matches!(RunConfig::from_toml(&no_guidance), Err(Error::Config(_))));
        let typo = EXAMPLE.replace("horizon = 4", "horizn = 4");
        assert!(RunConfig::from_toml(&typo).is_err());
        let short = EXAMPLE.replace("total_timesteps = 20000", "total_timesteps = 10");
        assert!(RunConfig::from_toml(&short).is_err());
        let bad_env = EXAMPLE.replace("rock_count = 4", "rock_count = 40");
        assert!(RunConfig::from_toml(&bad_env).is_err());
    }

    #[test]
    fn replay_agent_config() {
        let text = EXAMPLE
            .replace("kind = \"batch\"\ntimesteps_per_batch = 1000", "kind = \"replay\"\nsteps_per_iteration = 500\nbatch_size = 32")
            .replace("selection = \"prefix\"", "");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.iterations().unwrap(), 40);
        assert_eq!(cfg.agent.default_mixing_mode(), MixingMode::PerSample);
        let wrong = text.replace("nmix_fraction = 0.5", "nmix_fraction = 0.5\nmode = \"batch\"");
        assert!(RunConfig::from_toml(&wrong).is_err());
    }
}
