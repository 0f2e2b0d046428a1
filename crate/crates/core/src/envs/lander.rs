//! BlindLander: a 2-D point-mass lander with a blind altitude band.
//!
//! State is `(x, y, vx, vy)` with the pad at the origin. Action
//! `[main, side] in [-1, 1]^2`: the main engine gives upward acceleration
//! `main_power * (main + 1) / 2`, the side engine lateral acceleration
//! `side_power * side`. Integration is semi-implicit Euler with step `dt`.
//!
//! While `blind_band.0 < y < blind_band.1` the partial channel is all
//! zeros. Touching `y <= 0` ends the episode: a soft touchdown on the pad
//! pays `land_reward`, any touchdown faster than `landing_speed` costs
//! `crash_penalty`. Leaving the arena also costs `crash_penalty`. Every step
//! pays `-fuel_cost * (throttle + |side|) - distance_cost * |(x, y)|`.

use serde::{Deserialize, Serialize};

use super::{ActionSpace, EnvSpec, Environment, Step};
use crate::error::{config, usage, Result};
use crate::obs::{Action, ObservationPair};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlindLanderConfig {
    pub gravity: f64,
    pub main_power: f64,
    pub side_power: f64,
    pub dt: f64,
    /// `(y_low, y_high)` altitude interval with no partial observation.
    pub blind_band: (f64, f64),
    pub start_altitude: f64,
    /// Initial lateral offset is uniform in `[-start_spread, start_spread]`.
    pub start_spread: f64,
    pub pad_half_width: f64,
    /// Maximum `|vx|` and `|vy|` for a soft touchdown.
    pub landing_speed: f64,
    pub arena_half_width: f64,
    pub ceiling: f64,
    pub land_reward: f64,
    pub crash_penalty: f64,
    pub fuel_cost: f64,
    pub distance_cost: f64,
    /// Weight of the potential `-(|(x, y)| + |(vx, vy)|)`; each step pays
    /// the change in potential.
    pub shaping: f64,
    /// Episode wind is uniform in `[-max_wind, max_wind]`.
    pub max_wind: f64,
    pub discount: f64,
    pub max_episode_steps: usize,
}

impl Default for BlindLanderConfig {
    fn default() -> Self {
        Self {
            gravity: 1.0,
            main_power: 2.0,
            side_power: 0.5,
            dt: 0.1,
            blind_band: (1.0, 9.0),
            start_altitude: 10.0,
            start_spread: 2.0,
            pad_half_width: 1.0,
            landing_speed: 0.5,
            arena_half_width: 6.0,
            ceiling: 14.0,
            land_reward: 100.0,
            crash_penalty: 100.0,
            fuel_cost: 0.01,
            distance_cost: 0.001,
            shaping: 10.0,
            max_wind: 0.0,
            discount: 0.99,
            max_episode_steps: 300,
        }
    }
}

impl BlindLanderConfig {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.blind_band;
        if !(0.0 < lo && lo < hi && hi < self.start_altitude) {
            return config(format!(
                "blind band must satisfy 0 < y_low < y_high < start_altitude, got ({lo}, {hi}) with start {}",
                self.start_altitude
            ));
        }
        if !(self.dt > 0.0 && self.gravity >= 0.0 && self.main_power > 0.0 && self.side_power >= 0.0) {
            return config("lander physics constants must be positive");
        }
        if !(self.landing_speed > 0.0 && self.pad_half_width > 0.0) {
            return config("landing tolerances must be positive");
        }
        if !(self.max_wind >= 0.0) {
            return config("max_wind must be non-negative");
        }
        if self.start_spread > self.arena_half_width || self.start_altitude >= self.ceiling {
            return config("start state must lie inside the arena");
        }
        Ok(())
    }
}

/// Physical state of the lander.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanderState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Lateral acceleration from wind, fixed for the episode and never
    /// observed.
    pub wind: f64,
}

#[derive(Debug, Clone)]
pub struct BlindLander {
    config: BlindLanderConfig,
    spec: EnvSpec,
    state: LanderState,
    steps: usize,
    done: bool,
}

/// Indices of the velocity components in the observation vector.
pub const VELOCITY_DIMS: [usize; 2] = [2, 3];

impl BlindLander {
    pub fn new(config: BlindLanderConfig) -> Result<Self> {
        config.validate()?;
        let spec = EnvSpec {
            obs_dim: 4,
            action_space: ActionSpace::Continuous {
                dim: 2,
                low: -1.0,
                high: 1.0,
            },
            discount: config.discount,
            max_episode_steps: config.max_episode_steps,
            continuous_observations: true,
        };
        spec.validate()?;
        Ok(Self {
            state: LanderState {
                x: 0.0,
                y: config.start_altitude,
                vx: 0.0,
                vy: 0.0,
                wind: 0.0,
            },
            config,
            spec,
            steps: 0,
            done: true,
        })
    }

    pub fn config(&self) -> &BlindLanderConfig {
        &self.config
    }

    pub fn state(&self) -> LanderState {
        self.state
    }

    pub fn in_blind_band(&self) -> bool {
        let (lo, hi) = self.config.blind_band;
        self.state.y > lo && self.state.y < hi
    }

    /// Scaled state; roughly unit magnitude over the arena.
    fn full_observation(&self) -> Vec<f64> {
        let s = self.state;
        vec![
            s.x / self.config.arena_half_width,
            s.y / self.config.start_altitude,
            s.vx,
            s.vy,
        ]
    }

    fn observe(&self) -> ObservationPair {
        let full = self.full_observation();
        let partial = if self.in_blind_band() {
            vec![0.0; full.len()]
        } else {
            full.clone()
        };
        ObservationPair::new(full, partial)
    }

    fn potential(&self) -> f64 {
        let s = self.state;
        -self.config.shaping * (s.x.hypot(s.y) + s.vx.hypot(s.vy))
    }

    /// Starts an episode from an explicit state.
    pub fn set_state(&mut self, state: LanderState) -> ObservationPair {
        self.state = state;
        self.steps = 0;
        self.done = false;
        self.observe()
    }
}

impl Environment for BlindLander {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut RngStream) -> ObservationPair {
        let spread = self.config.start_spread;
        let x = rng.uniform_range(-spread, spread);
        let w = self.config.max_wind;
        let wind = if w > 0.0 { rng.uniform_range(-w, w) } else { 0.0 };
        self.set_state(LanderState {
            x,
            y: self.config.start_altitude,
            vx: 0.0,
            vy: 0.0,
            wind,
        })
    }

    fn step(&mut self, action: &Action, _rng: &mut RngStream) -> Result<Step> {
        if self.done {
            return usage("step called on a finished episode; call reset first");
        }
        self.spec.action_space.validate(action)?;
        let a = self.spec.action_space.encode(action);
        let c = &self.config;
        let throttle = (a[0] + 1.0) / 2.0;
        let side = a[1];

        let ax = c.side_power * side + self.state.wind;
        let ay = c.main_power * throttle - c.gravity;
        let before = self.potential();
        let s = &mut self.state;
        s.vx += ax * c.dt;
        s.vy += ay * c.dt;
        s.x += s.vx * c.dt;
        s.y += s.vy * c.dt;

        let mut reward = -c.fuel_cost * (throttle + side.abs())
            - c.distance_cost * (s.x * s.x + s.y * s.y).sqrt();
        let after = self.potential();
        reward += after - before;
        let c = &self.config;
        let s = &mut self.state;
        let mut terminal = false;
        if s.y <= 0.0 {
            terminal = true;
            let soft = s.vy.abs() <= c.landing_speed && s.vx.abs() <= c.landing_speed;
            if !soft {
                reward -= c.crash_penalty;
            } else if s.x.abs() <= c.pad_half_width {
                reward += c.land_reward;
            }
            s.y = 0.0;
        } else if s.x.abs() > c.arena_half_width || s.y > c.ceiling {
            terminal = true;
            reward -= c.crash_penalty;
        }

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
        "BlindLander".to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lander() -> BlindLander {
        BlindLander::new(BlindLanderConfig::default()).unwrap()
    }

    #[test]
    fn reset_starts_at_rest_at_start_altitude() {
        let mut e = lander();
        e.reset(&mut RngStream::new(0, "env"));
        let s = e.state();
        assert_eq!(s.y, 10.0);
        assert_eq!((s.vx, s.vy), (0.0, 0.0));
        assert!(s.x.abs() <= 2.0);
    }

    #[test]
    fn band_validation() {
        let mut c = BlindLanderConfig::default();
        c.blind_band = (7.0, 3.0);
        assert!(BlindLander::new(c.clone()).is_err());
        c.blind_band = (3.0, 11.0);
        assert!(BlindLander::new(c).is_err());
    }

    #[test]
    fn blind_band_zeroes_partial_channel() {
        let mut e = lander();
        let mut rng = RngStream::new(0, "env");
        e.set_state(LanderState { x: 0.5, y: 5.0, vx: 0.1, vy: -0.5, wind: 0.0 });
        let s = e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).unwrap();
        assert!(s.obs.partial.iter().all(|&v| v == 0.0));
        let st = e.state();
        assert_eq!(
            s.obs.full,
            vec![st.x / 6.0, st.y / 10.0, st.vx, st.vy]
        );
        e.set_state(LanderState { x: 0.5, y: 9.5, vx: 0.0, vy: 0.0, wind: 0.0 });
        let s = e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).unwrap();
        assert_eq!(s.obs.full, s.obs.partial);
    }

    #[test]
    fn hover_thrust_keeps_velocity_constant() {
        let mut e = lander();
        let mut rng = RngStream::new(0, "env");
        e.set_state(LanderState { x: 0.0, y: 5.0, vx: 0.0, vy: -0.3, wind: 0.0 });
        for _ in 0..10 {
            e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).unwrap();
        }
        assert!((e.state().vy + 0.3).abs() < 1e-12);
    }

    #[test]
    fn soft_landing_on_pad_pays() {
        let mut e = lander();
        let mut rng = RngStream::new(0, "env");
        e.set_state(LanderState { x: 0.2, y: 0.01, vx: 0.0, vy: -0.2, wind: 0.0 });
        let s = e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).unwrap();
        assert!(s.terminal);
        assert!(s.reward > 99.0);
    }

    #[test]
    fn hard_landing_crashes() {
        let mut e = lander();
        let mut rng = RngStream::new(0, "env");
        e.set_state(LanderState { x: 0.2, y: 0.05, vx: 0.0, vy: -2.0, wind: 0.0 });
        let s = e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).unwrap();
        assert!(s.terminal);
        assert!(s.reward < -99.0);
        assert!(e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).is_err());
    }

    #[test]
    fn wrong_action_shape_rejected() {
        let mut e = lander();
        let mut rng = RngStream::new(0, "env");
        e.reset(&mut rng);
        assert!(e.step(&Action::Continuous(vec![0.0]), &mut rng).is_err());
        assert!(e.step(&Action::Discrete(0), &mut rng).is_err());
    }

    #[test]
    fn replaying_an_action_log_is_bitwise_reproducible() {
        let mut rng = RngStream::new(4, "actions");
        let actions: Vec<Action> = (0..300)
            .map(|_| Action::Continuous(vec![rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)]))
            .collect();
        let run = || {
            let mut e = lander();
            let mut env_rng = RngStream::new(1, "env");
            let mut trace = vec![e.reset(&mut env_rng).full];
            for a in &actions {
                let s = e.step(a, &mut env_rng).unwrap();
                trace.push(s.obs.full.clone());
                if s.done() {
                    break;
                }
            }
            trace
                .into_iter()
                .flatten()
                .map(f64::to_bits)
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn hovering_scores_near_zero_and_free_fall_crashes() {
        let mut e = lander();
        let mut rng = RngStream::new(0, "env");
        e.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let s = e.step(&Action::Continuous(vec![0.0, 0.0]), &mut rng).unwrap();
            total += s.reward;
            if s.done() {
                assert!(s.truncated);
                break;
            }
        }
        assert!(total < 0.0 && total > -10.0, "hover return {total}");
        let hover = total;

        e.reset(&mut rng);
        let mut total = 0.0;
        loop {
            let s = e.step(&Action::Continuous(vec![-1.0, 0.0]), &mut rng).unwrap();
            total += s.reward;
            if s.done() {
                assert!(s.terminal);
                break;
            }
        }
        assert!(total < hover - 50.0, "free-fall return {total}");
    }
}
