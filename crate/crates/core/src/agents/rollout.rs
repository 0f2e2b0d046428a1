use crate::envs::{discounted_return, EnvSpec, Environment};
use crate::error::Result;
use crate::history::HistoryWindow;
use crate::obs::{Action, Channel, ObservationPair, TransitionSample};
use crate::rng::RngStream;

/// A finished episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode_id: u64,
    pub ret: f64,
    pub disc_return: f64,
    pub length: u64,
}

/// Result of [`Rollout::step`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub sample: TransitionSample,
    pub finished: Option<EpisodeRecord>,
}

/// Environment plus the agent-side episode state: the current observation,
/// the history window and the previous action. Episodes continue across
/// calls, so a batch may start in the middle of one.
pub struct Rollout {
    env: Box<dyn Environment>,
    spec: EnvSpec,
    rng: RngStream,
    pending: ObservationPair,
    window: HistoryWindow,
    prev_action: Vec<f64>,
    episode_id: u64,
    step_index: u64,
    rewards: Vec<f64>,
    needs_reset: bool,
}

impl Rollout {
    pub fn new(mut env: Box<dyn Environment>, horizon: usize, mut rng: RngStream) -> Self {
        let spec = env.spec().clone();
        let pending = env.reset(&mut rng);
        let act_dim = spec.action_space.encoding_dim();
        Self {
            window: HistoryWindow::new(horizon, spec.obs_dim, act_dim),
            prev_action: vec![0.0; act_dim],
            env,
            spec,
            rng,
            pending,
            episode_id: 0,
            step_index: 0,
            rewards: Vec::new(),
            needs_reset: false,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn history_dim(&self) -> usize {
        self.window.flat_dim()
    }

    fn reset_if_needed(&mut self) {
        if self.needs_reset {
            self.pending = self.env.reset(&mut self.rng);
            self.window.reset();
            self.prev_action.iter_mut().for_each(|a| *a = 0.0);
            self.episode_id += 1;
            self.step_index = 0;
            self.rewards.clear();
            self.needs_reset = false;
        }
    }

    /// Window and previous action as they stand before the next
    /// [`observe`](Self::observe), with any pending episode reset applied.
    pub fn snapshot(&mut self) -> (HistoryWindow, Vec<f64>) {
        self.reset_if_needed();
        (self.window.clone(), self.prev_action.clone())
    }

    /// Pushes the current observation through `channel` and returns h_t.
    pub fn observe(&mut self, channel: Channel) -> Result<Vec<f64>> {
        self.reset_if_needed();
        self.window
            .push(channel.flag(), self.pending.channel(channel), &self.prev_action)?;
        Ok(self.window.flatten())
    }

    /// History that would follow the last step if its resulting observation
    /// were seen through `channel`. Valid between `step` and the next
    /// `observe`, including after the episode ended.
    pub fn peek_next_history(&self, channel: Channel) -> Result<Vec<f64>> {
        let mut w = self.window.clone();
        w.push(channel.flag(), self.pending.channel(channel), &self.prev_action)?;
        Ok(w.flatten())
    }

    /// Executes `action` for the observation last passed to `observe`.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        let step = self.env.step(&action, &mut self.rng)?;
        let encoded = self.spec.action_space.encode(&action);
        let obs = std::mem::replace(&mut self.pending, step.obs.clone());
        let sample = TransitionSample {
            obs,
            action,
            reward: step.reward,
            done: step.done(),
            truncated: step.truncated && !step.terminal,
            episode_id: self.episode_id,
            step_index: self.step_index,
        };
        self.rewards.push(step.reward);
        self.prev_action = encoded;
        self.step_index += 1;
        let finished = if step.done() {
            self.needs_reset = true;
            Some(EpisodeRecord {
                episode_id: self.episode_id,
                ret: self.rewards.iter().sum(),
                disc_return: discounted_return(&self.rewards, self.spec.discount),
                length: self.step_index,
            })
        } else {
            None
        };
        Ok(StepOutcome { sample, finished })
    }
}
