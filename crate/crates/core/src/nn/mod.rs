//! Small dense networks with hand-written reverse-mode gradients.

mod checkpoint;
mod dist;
mod mlp;
mod optim;

pub use checkpoint::Checkpoint;
pub use dist::{categorical_policy_head, gaussian_policy_head, log_softmax, softmax, Categorical, DiagGaussian};
pub use mlp::{Activation, ForwardCache, Mlp};
pub use optim::{Optimizer, OptimizerKind};
