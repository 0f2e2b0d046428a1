//! RockSample(n, k): an n x n grid with k rocks of unknown quality.
//!
//! The rover starts on the west edge. Moving east off the grid ends the
//! episode with the exit reward. Sampling a good rock pays off and turns it
//! bad; sampling a bad rock is penalised. `check_i` returns a noisy reading
//! of rock i whose accuracy decays with distance:
//! `P(correct) = 0.5 + 0.5 * 2^(-d / d0)`.
//!
//! Observation layout (both channels, same length):
//!
//! | block            | width    | partial channel          |
//! |------------------|----------|--------------------------|
//! | position one-hot | n * n    | as full                  |
//! | check result     | 3        | none / good / bad        |
//! | previous action  | 5 + k    | as full                  |
//! | rock values      | k        | zeros (+1 good, -1 bad in full) |

use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvSpec, Environment, Step};
use crate::error::{config, usage, Result};
use crate::obs::{Action, ObservationPair};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockSampleConfig {
    pub grid_size: usize,
    pub rock_count: usize,
    /// Explicit `[x, y]` rock cells. When absent, positions are drawn from
    /// `rock_seed`: distinct cells, never the start cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rock_positions: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    pub rock_seed: u64,
    #[serde(default = "default_d0")]
    pub half_efficiency_distance: f64,
    #[serde(default = "default_reward")]
    pub good_sample_reward: f64,
    #[serde(default = "default_bad_reward")]
    pub bad_sample_reward: f64,
    #[serde(default = "default_reward")]
    pub exit_reward: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_max_steps")]
    pub max_episode_steps: usize,
    /// Prior probability that a rock is good at reset.
    #[serde(default = "default_good_probability")]
    pub good_probability: f64,
}

fn default_d0() -> f64 {
    20.0
}
fn default_reward() -> f64 {
    10.0
}
fn default_bad_reward() -> f64 {
    -10.0
}
fn default_discount() -> f64 {
    0.95
}
fn default_max_steps() -> usize {
    100
}
fn default_good_probability() -> f64 {
    0.5
}

impl RockSampleConfig {
    pub fn new(grid_size: usize, rock_count: usize) -> Self {
        Self {
            grid_size,
            rock_count,
            rock_positions: None,
            rock_seed: 0,
            half_efficiency_distance: default_d0(),
            good_sample_reward: default_reward(),
            bad_sample_reward: default_bad_reward(),
            exit_reward: default_reward(),
            discount: default_discount(),
            max_episode_steps: default_max_steps(),
            good_probability: default_good_probability(),
        }
    }

    pub fn start_cell(&self) -> (usize, usize) {
        (0, self.grid_size / 2)
    }

    /// Rock cells, either explicit or drawn from `rock_seed`.
    pub fn resolve_rock_positions(&self) -> Result<Vec<(usize, usize)>> {
        let n = self.grid_size;
        let positions: Vec<(usize, usize)> = match &self.rock_positions {
            Some(p) => p.iter().map(|c| (c[0], c[1])).collect(),
            None => {
                if self.rock_count + 1 > n * n {
                    return config(format!(
                        "cannot place {} rocks on a {n}x{n} grid",
                        self.rock_count
                    ));
                }
                let start = self.start_cell();
                let mut cells: Vec<(usize, usize)> = (0..n)
                    .flat_map(|y| (0..n).map(move |x| (x, y)))
                    .filter(|&c| c != start)
                    .collect();
                let mut rng = RngStream::new(self.rock_seed, "rocksample/rock-positions");
                rng.shuffle(&mut cells);
                cells.truncate(self.rock_count);
                cells
            }
        };
        if positions.len() != self.rock_count {
            return config(format!(
                "{} rock positions given for rock_count {}",
                positions.len(),
                self.rock_count
            ));
        }
        for (i, &(x, y)) in positions.iter().enumerate() {
            if x >= n || y >= n {
                return config(format!("rock {i} at ({x},{y}) lies outside the {n}x{n} grid"));
            }
            if positions[..i].contains(&(x, y)) {
                return config(format!("rock {i} at ({x},{y}) duplicates another rock"));
            }
        }
        Ok(positions)
    }

    fn validate(&self) -> Result<()> {
        if self.grid_size < 1 {
            return config("grid_size must be >= 1");
        }
        if !(self.half_efficiency_distance > 0.0) {
            return config("half_efficiency_distance must be > 0");
        }
        if !(0.0..=1.0).contains(&self.good_probability) {
            return config("good_probability must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Decoded RockSample action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RockSampleAction {
    North,
    South,
    East,
    West,
    Sample,
    Check(usize),
}

impl RockSampleAction {
    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Self::North,
            1 => Self::South,
            2 => Self::East,
            3 => Self::West,
            4 => Self::Sample,
            k => Self::Check(k - 5),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Self::North => 0,
            Self::South => 1,
            Self::East => 2,
            Self::West => 3,
            Self::Sample => 4,
            Self::Check(k) => 5 + k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CheckResult {
    None,
    Good,
    Bad,
}

#[derive(Debug, Clone)]
pub struct RockSample {
    config: RockSampleConfig,
    spec: EnvSpec,
    rocks: Vec<(usize, usize)>,
    rock_good: Vec<bool>,
    pos: (usize, usize),
    last_check: CheckResult,
    last_action: Option<usize>,
    steps: usize,
    done: bool,
}

impl RockSample {
    pub fn new(config: RockSampleConfig) -> Result<Self> {
        config.validate()?;
        let rocks = config.resolve_rock_positions()?;
        let n = config.grid_size;
        let k = config.rock_count;
        let spec = EnvSpec {
            obs_dim: n * n + 3 + (5 + k) + k,
            action_space: ActionSpace::Discrete(5 + k),
            discount: config.discount,
            max_episode_steps: config.max_episode_steps,
            continuous_observations: false,
        };
        spec.validate()?;
        Ok(Self {
            pos: config.start_cell(),
            rock_good: vec![false; k],
            config,
            spec,
            rocks,
            last_check: CheckResult::None,
            last_action: None,
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &RockSampleConfig {
        &self.config
    }

    pub fn rock_positions(&self) -> &[(usize, usize)] {
        &self.rocks
    }

    pub fn rock_values(&self) -> &[bool] {
        &self.rock_good
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    /// Puts the environment into an explicit underlying state and starts a
    /// fresh episode from it.
    pub fn set_state(&mut self, pos: (usize, usize), rock_good: &[bool]) -> Result<ObservationPair> {
        let n = self.config.grid_size;
        if pos.0 >= n || pos.1 >= n || rock_good.len() != self.rocks.len() {
            return usage("invalid RockSample state");
        }
        self.pos = pos;
        self.rock_good = rock_good.to_vec();
        self.last_check = CheckResult::None;
        self.last_action = None;
        self.steps = 0;
        self.done = false;
        Ok(self.observe())
    }

    /// Probability that a check of a rock at distance `d` reads correctly.
    pub fn sensor_accuracy(&self, d: f64) -> f64 {
        0.5 + 0.5 * 2f64.powf(-d / self.config.half_efficiency_distance)
    }

    pub fn rock_distance(&self, rock_index: usize) -> f64 {
        let (rx, ry) = self.rocks[rock_index];
        let dx = rx as f64 - self.pos.0 as f64;
        let dy = ry as f64 - self.pos.1 as f64;
        (dx * dx + dy * dy).sqrt()
    }

    /// Noisy sensor reading of rock `rock_index`: `true` means "good".
    pub fn check_rock(&self, rock_index: usize, rng: &mut RngStream) -> Result<bool> {
        if rock_index >= self.rocks.len() {
            return usage(format!(
                "rock index {rock_index} out of range for {} rocks",
                self.rocks.len()
            ));
        }
        let p = self.sensor_accuracy(self.rock_distance(rock_index));
        let truth = self.rock_good[rock_index];
        Ok(if rng.bernoulli(p) { truth } else { !truth })
    }

    fn observe(&self) -> ObservationPair {
        let n = self.config.grid_size;
        let k = self.rocks.len();
        let mut full = vec![0.0; self.spec.obs_dim];
        full[self.pos.1 * n + self.pos.0] = 1.0;
        let base = n * n;
        let check_slot = match self.last_check {
            CheckResult::None => 0,
            CheckResult::Good => 1,
            CheckResult::Bad => 2,
        };
        full[base + check_slot] = 1.0;
        let base = base + 3;
        if let Some(a) = self.last_action {
            full[base + a] = 1.0;
        }
        let rock_base = base + 5 + k;
        let mut partial = full.clone();
        for (i, &good) in self.rock_good.iter().enumerate() {
            full[rock_base + i] = if good { 1.0 } else { -1.0 };
        }
        partial[rock_base..].iter_mut().for_each(|x| *x = 0.0);
        ObservationPair::new(full, partial)
    }

    /// Index of the rock on the rover's cell, if any.
    fn rock_here(&self) -> Option<usize> {
        self.rocks.iter().position(|&c| c == self.pos)
    }
}

impl Environment for RockSample {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut RngStream) -> ObservationPair {
        self.pos = self.config.start_cell();
        let p = self.config.good_probability;
        self.rock_good = (0..self.rocks.len()).map(|_| rng.bernoulli(p)).collect();
        self.last_check = CheckResult::None;
        self.last_action = None;
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &Action, rng: &mut RngStream) -> Result<Step> {
        if self.done {
            return usage("step called on a finished episode; call reset first");
        }
        self.spec.action_space.validate(action)?;
        let index = action.index().expect("validated discrete action");
        let n = self.config.grid_size;
        let (x, y) = self.pos;
        let mut reward = 0.0;
        let mut terminal = false;
        self.last_check = CheckResult::None;
        match RockSampleAction::from_index(index) {
            RockSampleAction::North => self.pos.1 = (y + 1).min(n - 1),
            RockSampleAction::South => self.pos.1 = y.saturating_sub(1),
            RockSampleAction::West => self.pos.0 = x.saturating_sub(1),
            RockSampleAction::East => {
                if x + 1 == n {
                    reward = self.config.exit_reward;
                    terminal = true;
                } else {
                    self.pos.0 = x + 1;
                }
            }
            RockSampleAction::Sample => {
                if let Some(r) = self.rock_here() {
                    if self.rock_good[r] {
                        reward = self.config.good_sample_reward;
                        self.rock_good[r] = false;
                    } else {
                        reward = self.config.bad_sample_reward;
                    }
                }
            }
            RockSampleAction::Check(r) => {
                self.last_check = if self.check_rock(r, rng)? {
                    CheckResult::Good
                } else {
                    CheckResult::Bad
                };
            }
        }
        self.last_action = Some(index);
        self.steps += 1;
        let truncated = !terminal && self.steps >= self.spec.max_episode_steps;
        self.done = terminal || truncated;
        Ok(Step {
            obs: self.observe(),
            reward,
            terminal,
            truncated,
        })
    }

    fn name(&self) -> String {
        format!("RockSample({},{})", self.config.grid_size, self.config.rock_count)
    }
}
