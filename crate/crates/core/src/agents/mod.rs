//! Trainers: a clipped-surrogate batch policy-gradient agent and a
//! replay-buffer agent (double-Q for discrete actions, fixed-temperature
//! twin-critic actor for continuous ones).

mod batch;
mod gae;
mod policy;
mod replay;
mod rollout;

pub use batch::{batch_update, BatchAgentConfig, BatchTrainer, EpisodeBatch, UpdateDiagnostics};
pub use gae::{compute_gae, normalize_advantages};
pub use policy::{argmax, squash, ActionDist, EvalPolicy, Policy};
pub use replay::{
    replay_update, ContinuousReplayAgent, DiscreteReplayAgent, ReplayAgent, ReplayAgentConfig, ReplayBuffer,
    ReplayDiagnostics, ReplayTrainer, Transition,
};
pub use rollout::{EpisodeRecord, Rollout};

use crate::nn::Checkpoint;

/// What one training iteration produced.
#[derive(Debug, Clone, Default)]
pub struct IterationReport {
    /// Environment steps taken this iteration.
    pub timesteps: u64,
    /// Episodes that finished during the iteration, in completion order.
    pub episodes: Vec<EpisodeRecord>,
    /// Mean policy entropy over the iteration's decisions.
    pub entropy: f64,
    /// Fraction of samples trained on the partial channel.
    pub frac_partial: f64,
}

/// Common interface the harness drives.
pub trait Trainer: Send {
    fn run_iteration(&mut self) -> crate::Result<IterationReport>;
    fn iteration(&self) -> u64;
    fn checkpoint(&self) -> Checkpoint;
    /// The current policy, for evaluation.
    fn policy(&self) -> EvalPolicy;
}
