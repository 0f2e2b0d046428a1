use crate::envs::ActionSpace;
use crate::error::{usage, Result};
use crate::nn::{categorical_policy_head, gaussian_policy_head, Activation, Categorical, DiagGaussian, Mlp};
use crate::obs::Action;
use crate::rng::RngStream;

/// Action distribution produced by a [`Policy`].
#[derive(Debug, Clone)]
pub enum ActionDist {
    Categorical(Categorical),
    Gaussian(DiagGaussian),
}

impl ActionDist {
    pub fn log_prob(&self, action: &Action) -> f64 {
        match (self, action) {
            (ActionDist::Categorical(c), Action::Discrete(i)) => c.log_prob(*i),
            (ActionDist::Gaussian(g), Action::Continuous(a)) => g.log_prob(a),
            _ => panic!("action {action:?} does not match distribution"),
        }
    }

    pub fn entropy(&self) -> f64 {
        match self {
            ActionDist::Categorical(c) => c.entropy(),
            ActionDist::Gaussian(g) => g.entropy(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Action {
        match self {
            ActionDist::Categorical(c) => Action::Discrete(c.sample(rng)),
            ActionDist::Gaussian(g) => Action::Continuous(g.sample(rng)),
        }
    }

    pub fn mode(&self) -> Action {
        match self {
            ActionDist::Categorical(c) => Action::Discrete(c.mode()),
            ActionDist::Gaussian(g) => Action::Continuous(g.mean().to_vec()),
        }
    }

    /// Gradients of `log p(action)` w.r.t. the network output and, for
    /// Gaussians, the log-std vector.
    pub fn grad_log_prob(&self, action: &Action) -> (Vec<f64>, Option<Vec<f64>>) {
        match (self, action) {
            (ActionDist::Categorical(c), Action::Discrete(i)) => (c.grad_log_prob(*i), None),
            (ActionDist::Gaussian(g), Action::Continuous(a)) => {
                let (dm, ds) = g.grad_log_prob(a);
                (dm, Some(ds))
            }
            _ => panic!("action {action:?} does not match distribution"),
        }
    }

    /// Gradients of the entropy, laid out like [`grad_log_prob`](Self::grad_log_prob).
    pub fn grad_entropy(&self) -> (Vec<f64>, Option<Vec<f64>>) {
        match self {
            ActionDist::Categorical(c) => (c.grad_entropy(), None),
            ActionDist::Gaussian(g) => (vec![0.0; g.mean().len()], Some(vec![1.0; g.mean().len()])),
        }
    }
}

/// Stochastic policy over a history vector: categorical logits for discrete
/// spaces, Gaussian mean plus a state-independent log-std for continuous ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub net: Mlp,
    pub log_std: Option<Vec<f64>>,
    pub action_space: ActionSpace,
}

impl Policy {
    pub fn new(
        input_dim: usize,
        hidden: &[usize],
        activation: Activation,
        action_space: ActionSpace,
        init_log_std: f64,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let out = action_space.encoding_dim();
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(out);
        let mut net = Mlp::new(&sizes, activation, Activation::Identity, rng)?;
        net.scale_output_layer(0.01);
        let log_std = (!action_space.is_discrete()).then(|| vec![init_log_std; out]);
        Ok(Self {
            net,
            log_std,
            action_space,
        })
    }

    pub fn from_parts(net: Mlp, log_std: Option<Vec<f64>>, action_space: ActionSpace) -> Result<Self> {
        if net.output_dim() != action_space.encoding_dim() {
            return usage("policy network output does not match the action space");
        }
        if action_space.is_discrete() != log_std.is_none() {
            return usage("log_std must be present exactly for continuous action spaces");
        }
        Ok(Self {
            net,
            log_std,
            action_space,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn dist_from_output(&self, output: &[f64]) -> ActionDist {
        match &self.log_std {
            None => ActionDist::Categorical(categorical_policy_head(output)),
            Some(ls) => ActionDist::Gaussian(gaussian_policy_head(output, ls)),
        }
    }

    pub fn distribution(&self, history: &[f64]) -> Result<ActionDist> {
        Ok(self.dist_from_output(&self.net.forward(history)?))
    }

    /// Samples an action; returns it with its log-probability and the
    /// distribution's entropy.
    pub fn act(&self, history: &[f64], rng: &mut RngStream) -> Result<(Action, f64, f64)> {
        let d = self.distribution(history)?;
        let a = d.sample(rng);
        Ok((a.clone(), d.log_prob(&a), d.entropy()))
    }
}

/// How a trained agent picks actions at evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalPolicy {
    /// Sample from the policy; the environment clips continuous actions.
    Stochastic(Policy),
    /// Sample a Gaussian and squash it into the action bounds with tanh.
    Squashed(Policy),
    /// Argmax over a Q-network's outputs.
    GreedyQ(Mlp),
}

impl EvalPolicy {
    pub fn kind(&self) -> &'static str {
        match self {
            EvalPolicy::Stochastic(_) => "stochastic",
            EvalPolicy::Squashed(_) => "squashed",
            EvalPolicy::GreedyQ(_) => "greedy_q",
        }
    }

    pub fn act(&self, history: &[f64], rng: &mut RngStream) -> Result<Action> {
        match self {
            EvalPolicy::Stochastic(p) => Ok(p.act(history, rng)?.0),
            EvalPolicy::Squashed(p) => {
                let d = p.distribution(history)?;
                match d.sample(rng) {
                    Action::Continuous(u) => Ok(Action::Continuous(squash(&p.action_space, &u))),
                    other => Ok(other),
                }
            }
            EvalPolicy::GreedyQ(q) => Ok(Action::Discrete(argmax(&q.forward(history)?))),
        }
    }
}

/// Maps an unbounded vector into the box `[low, high]` through tanh.
pub fn squash(space: &ActionSpace, u: &[f64]) -> Vec<f64> {
    match space {
        ActionSpace::Continuous { low, high, .. } => {
            let (mid, half) = ((high + low) / 2.0, (high - low) / 2.0);
            u.iter().map(|x| mid + half * x.tanh()).collect()
        }
        ActionSpace::Discrete(_) => u.to_vec(),
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
