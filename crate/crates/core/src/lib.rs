//! Guided reinforcement learning under partial observability.
//!
//! Training starts on fully observable samples and hands over to partial
//! observations on a linear schedule, so the final policy only ever needs
//! the partial channel. The crate ships two small POMDP environments, a
//! clipped-surrogate batch agent, a replay agent, the observability
//! schedule and a multi-seed experiment harness.

pub mod agents;
pub mod envs;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod history;
pub mod nn;
pub mod obs;
pub mod rng;

pub use error::{Error, Result};
