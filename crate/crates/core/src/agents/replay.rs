use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::policy::{argmax, squash};
use crate::agents::rollout::Rollout;
use crate::agents::{EvalPolicy, IterationReport, Policy, Trainer};
use crate::envs::{ActionSpace, Environment};
use crate::error::{config, usage, Error, Result};
use crate::guidance::MixingSchedule;
use crate::nn::{Activation, Checkpoint, Mlp, Optimizer, OptimizerKind};
use crate::obs::{Action, Channel};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayAgentConfig {
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_update_interval: u64,
    pub gradient_steps_per_env_step: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub gamma: f64,
    /// Polyak coefficient for target networks.
    pub tau: f64,
    /// Entropy temperature (continuous actions).
    pub alpha: f64,
    /// Epsilon-greedy schedule (discrete actions): linear from start to end
    /// over the first `epsilon_fraction` of all environment steps.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_fraction: f64,
    /// Environment steps before the first gradient update.
    pub learning_starts: u64,
    /// Environment steps that make up one reported iteration.
    pub steps_per_iteration: u64,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub init_log_std: f64,
    pub log_std_bounds: [f64; 2],
}

impl Default for ReplayAgentConfig {
    fn default() -> Self {
        Self {
            buffer_capacity: 500_000,
            batch_size: 256,
            target_update_interval: 1,
            gradient_steps_per_env_step: 1,
            learning_rate: 3e-4,
            optimizer: OptimizerKind::Adam,
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.2,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_fraction: 0.1,
            learning_starts: 1000,
            steps_per_iteration: 1000,
            hidden_sizes: vec![256, 256],
            activation: Activation::Relu,
            init_log_std: 0.0,
            log_std_bounds: [-5.0, 1.0],
        }
    }
}

impl ReplayAgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return config(format!(
                "buffer_capacity ({}) must be at least batch_size ({}) > 0",
                self.buffer_capacity, self.batch_size
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return config(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return config(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if self.alpha < 0.0 {
            return config("alpha must be non-negative");
        }
        if self.target_update_interval == 0 || self.steps_per_iteration == 0 {
            return config("target_update_interval and steps_per_iteration must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return config("learning_rate must be positive");
        }
        if self.log_std_bounds[0] > self.log_std_bounds[1] {
            return config("log_std_bounds must be ordered");
        }
        Ok(())
    }

    fn epsilon(&self, step: u64, total_steps: u64) -> f64 {
        let horizon = self.epsilon_fraction * total_steps as f64;
        if horizon <= 0.0 {
            return self.epsilon_end;
        }
        let frac = step as f64 / horizon;
        if frac >= 1.0 {
            return self.epsilon_end;
        }
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// One stored transition. Histories are built from the channels chosen at
/// insertion time and never change afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub history: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_history: Vec<f64>,
    /// True only for real terminal states; time-limit ends bootstrap.
    pub terminal: bool,
}

/// Fixed-capacity FIFO store sampled uniformly with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return config("replay buffer capacity must be positive");
        }
        Ok(Self {
            capacity,
            items: Vec::new(),
            next: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn insert(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_in_order(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    pub fn sample_indices(&self, batch_size: usize, rng: &mut RngStream) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return usage("cannot sample from an empty replay buffer");
        }
        Ok((0..batch_size).map(|_| rng.below(self.items.len())).collect())
    }

    pub fn sample(&self, batch_size: usize, rng: &mut RngStream) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayDiagnostics {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mean_q: f64,
}

fn mlp(input: usize, hidden: &[usize], output: usize, act: Activation, rng: &mut RngStream) -> Result<Mlp> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    Mlp::new(&sizes, act, Activation::Identity, rng)
}

fn opt(cfg: &ReplayAgentConfig, n: usize) -> Result<Optimizer> {
    Optimizer::new(cfg.optimizer, cfg.learning_rate, n)
}

/// Epsilon-greedy double Q-learning with twin critics.
#[derive(Debug, Clone)]
pub struct DiscreteReplayAgent {
    pub q: [Mlp; 2],
    pub q_target: [Mlp; 2],
    opts: [Optimizer; 2],
    n_actions: usize,
    updates: u64,
}

impl DiscreteReplayAgent {
    pub fn new(input: usize, n_actions: usize, cfg: &ReplayAgentConfig, rng: &mut RngStream) -> Result<Self> {
        let q1 = mlp(input, &cfg.hidden_sizes, n_actions, cfg.activation, rng)?;
        let q2 = mlp(input, &cfg.hidden_sizes, n_actions, cfg.activation, rng)?;
        let opts = [opt(cfg, q1.num_params())?, opt(cfg, q2.num_params())?];
        Ok(Self {
            q_target: [q1.clone(), q2.clone()],
            q: [q1, q2],
            opts,
            n_actions,
            updates: 0,
        })
    }

    pub fn q_values(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.q[0].forward(h)
    }

    pub fn act(&self, h: &[f64], epsilon: f64, rng: &mut RngStream) -> Result<Action> {
        if rng.uniform() < epsilon {
            Ok(Action::Discrete(rng.below(self.n_actions)))
        } else {
            Ok(Action::Discrete(argmax(&self.q_values(h)?)))
        }
    }

    /// `r + gamma * min_j Q'_j(h', argmax_a Q_1(h', a))`, or `r` on terminals.
    pub fn td_target(&self, t: &Transition, gamma: f64) -> Result<f64> {
        if t.terminal || gamma == 0.0 {
            return Ok(t.reward);
        }
        let a_star = argmax(&self.q[0].forward(&t.next_history)?);
        let q1 = self.q_target[0].forward(&t.next_history)?[a_star];
        let q2 = self.q_target[1].forward(&t.next_history)?[a_star];
        Ok(t.reward + gamma * q1.min(q2))
    }

    pub fn update(&mut self, batch: &[&Transition], cfg: &ReplayAgentConfig) -> Result<ReplayDiagnostics> {
        let targets = batch
            .iter()
            .map(|t| self.td_target(t, cfg.gamma))
            .collect::<Result<Vec<f64>>>()?;
        let m = batch.len() as f64;
        let mut loss = 0.0;
        let mut mean_q = 0.0;
        for k in 0..2 {
            let mut grads = self.q[k].zero_grads();
            for (t, y) in batch.iter().zip(&targets) {
                let a = t.action.index().expect("discrete action");
                let cache = self.q[k].forward_cached(&t.history)?;
                let err = cache.output()[a] - y;
                loss += err * err / m;
                mean_q += cache.output()[a] / (2.0 * m);
                let mut g = vec![0.0; self.n_actions];
                g[a] = 2.0 * err / m;
                self.q[k].backward(&cache, &g, &mut grads)?;
            }
            self.opts[k].step(&mut self.q[k], &grads)?;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("critic loss".into()));
        }
        self.updates += 1;
        if self.updates % cfg.target_update_interval == 0 {
            for k in 0..2 {
                self.q_target[k].soft_update_from(&self.q[k], cfg.tau);
            }
        }
        Ok(ReplayDiagnostics {
            critic_loss: loss / 2.0,
            actor_loss: 0.0,
            mean_q,
        })
    }
}

/// Fixed-temperature twin-critic actor-critic. The actor is a Gaussian with a
/// state-independent log-std whose samples are squashed into the action box.
#[derive(Debug, Clone)]
pub struct ContinuousReplayAgent {
    pub actor: Policy,
    pub q: [Mlp; 2],
    pub q_target: [Mlp; 2],
    q_opts: [Optimizer; 2],
    actor_opt: Optimizer,
    std_opt: Optimizer,
    updates: u64,
}

const SQUASH_EPS: f64 = 1e-6;

struct SquashedSample {
    eps: Vec<f64>,
    /// tanh(u), before scaling into the box.
    t: Vec<f64>,
    action: Vec<f64>,
    log_prob: f64,
}

impl ContinuousReplayAgent {
    pub fn new(input: usize, space: ActionSpace, cfg: &ReplayAgentConfig, rng: &mut RngStream) -> Result<Self> {
        let dim = space.encoding_dim();
        let actor = Policy::new(input, &cfg.hidden_sizes, cfg.activation, space, cfg.init_log_std, rng)?;
        let q1 = mlp(input + dim, &cfg.hidden_sizes, 1, cfg.activation, rng)?;
        let q2 = mlp(input + dim, &cfg.hidden_sizes, 1, cfg.activation, rng)?;
        Ok(Self {
            actor_opt: opt(cfg, actor.net.num_params())?,
            std_opt: opt(cfg, dim)?,
            q_opts: [opt(cfg, q1.num_params())?, opt(cfg, q2.num_params())?],
            q_target: [q1.clone(), q2.clone()],
            q: [q1, q2],
            actor,
            updates: 0,
        })
    }

    fn half_width(&self) -> f64 {
        match self.actor.action_space {
            ActionSpace::Continuous { low, high, .. } => (high - low) / 2.0,
            ActionSpace::Discrete(_) => 1.0,
        }
    }

    fn sample_squashed(&self, mean: &[f64], rng: &mut RngStream) -> SquashedSample {
        let ls = self.actor.log_std.as_ref().expect("continuous actor");
        let eps: Vec<f64> = mean.iter().map(|_| rng.standard_normal()).collect();
        let u: Vec<f64> = mean.iter().zip(ls).zip(&eps).map(|((m, s), e)| m + s.exp() * e).collect();
        let t: Vec<f64> = u.iter().map(|x| x.tanh()).collect();
        let half = self.half_width();
        let log_prob = eps
            .iter()
            .zip(ls)
            .zip(&t)
            .map(|((e, s), t)| {
                -0.5 * e * e - s - 0.5 * (2.0 * std::f64::consts::PI).ln() - (half * (1.0 - t * t) + SQUASH_EPS).ln()
            })
            .sum();
        SquashedSample {
            action: squash(&self.actor.action_space, &u),
            eps,
            t,
            log_prob,
        }
    }

    pub fn act(&self, h: &[f64], rng: &mut RngStream) -> Result<Action> {
        let mean = self.actor.net.forward(h)?;
        Ok(Action::Continuous(self.sample_squashed(&mean, rng).action))
    }

    fn critic_input(h: &[f64], a: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(h.len() + a.len());
        x.extend_from_slice(h);
        x.extend_from_slice(a);
        x
    }

    pub fn td_target(&self, t: &Transition, cfg: &ReplayAgentConfig, rng: &mut RngStream) -> Result<f64> {
        if t.terminal || cfg.gamma == 0.0 {
            return Ok(t.reward);
        }
        let mean = self.actor.net.forward(&t.next_history)?;
        let s = self.sample_squashed(&mean, rng);
        let x = Self::critic_input(&t.next_history, &s.action);
        let q = self.q_target[0].forward(&x)?[0].min(self.q_target[1].forward(&x)?[0]);
        Ok(t.reward + cfg.gamma * (q - cfg.alpha * s.log_prob))
    }

    pub fn update(&mut self, batch: &[&Transition], cfg: &ReplayAgentConfig, rng: &mut RngStream) -> Result<ReplayDiagnostics> {
        let m = batch.len() as f64;
        let targets = batch
            .iter()
            .map(|t| self.td_target(t, cfg, rng))
            .collect::<Result<Vec<f64>>>()?;
        let mut critic_loss = 0.0;
        let mut mean_q = 0.0;
        for k in 0..2 {
            let mut grads = self.q[k].zero_grads();
            for (t, y) in batch.iter().zip(&targets) {
                let a = match &t.action {
                    Action::Continuous(a) => a,
                    Action::Discrete(_) => return usage("discrete action in continuous replay agent"),
                };
                let cache = self.q[k].forward_cached(&Self::critic_input(&t.history, a))?;
                let err = cache.output()[0] - y;
                critic_loss += err * err / m;
                mean_q += cache.output()[0] / (2.0 * m);
                self.q[k].backward(&cache, &[2.0 * err / m], &mut grads)?;
            }
            self.q_opts[k].step(&mut self.q[k], &grads)?;
        }

        // Actor: minimise alpha * log pi(a|h) - min_k Q_k(h, a) with a reparameterised.
        let half = self.half_width();
        let ls = self.actor.log_std.clone().expect("continuous actor");
        let mut grads = self.actor.net.zero_grads();
        let mut std_grads = vec![0.0; ls.len()];
        let mut actor_loss = 0.0;
        for t in batch {
            let cache = self.actor.net.forward_cached(&t.history)?;
            let s = self.sample_squashed(cache.output(), rng);
            let x = Self::critic_input(&t.history, &s.action);
            let c1 = self.q[0].forward_cached(&x)?;
            let c2 = self.q[1].forward_cached(&x)?;
            let (k, cache_q) = if c1.output()[0] <= c2.output()[0] { (0, &c1) } else { (1, &c2) };
            let mut scratch = self.q[k].zero_grads();
            let dq_dx = self.q[k].backward_with_input(cache_q, &[1.0], &mut scratch)?;
            let dq_da = &dq_dx[t.history.len()..];
            actor_loss += (cfg.alpha * s.log_prob - cache_q.output()[0]) / m;
            let mut out_grad = vec![0.0; ls.len()];
            for j in 0..ls.len() {
                let tj = s.t[j];
                let one_minus = 1.0 - tj * tj;
                // d/du of -log(half * (1 - tanh(u)^2) + eps)
                let dlogdet = 2.0 * tj * half * one_minus / (half * one_minus + SQUASH_EPS);
                let dq_du = dq_da[j] * half * one_minus;
                let sigma_eps = ls[j].exp() * s.eps[j];
                out_grad[j] = (cfg.alpha * dlogdet - dq_du) / m;
                std_grads[j] += (cfg.alpha * (-1.0 + dlogdet * sigma_eps) - dq_du * sigma_eps) / m;
            }
            self.actor.net.backward(&cache, &out_grad, &mut grads)?;
        }
        if !(critic_loss.is_finite() && actor_loss.is_finite()) {
            return Err(Error::NonFinite("replay losses".into()));
        }
        self.actor_opt.step(&mut self.actor.net, &grads)?;
        let log_std = self.actor.log_std.as_mut().expect("continuous actor");
        self.std_opt.step_slice(log_std, &std_grads)?;
        for v in log_std.iter_mut() {
            *v = v.clamp(cfg.log_std_bounds[0], cfg.log_std_bounds[1]);
        }
        self.updates += 1;
        if self.updates % cfg.target_update_interval == 0 {
            for k in 0..2 {
                self.q_target[k].soft_update_from(&self.q[k], cfg.tau);
            }
        }
        Ok(ReplayDiagnostics {
            critic_loss: critic_loss / 2.0,
            actor_loss,
            mean_q,
        })
    }
}

#[derive(Debug, Clone)]
pub enum ReplayAgent {
    Discrete(DiscreteReplayAgent),
    Continuous(ContinuousReplayAgent),
}

/// One gradient step of the replay agent on a sampled minibatch.
pub fn replay_update(
    agent: &mut ReplayAgent,
    batch: &[&Transition],
    cfg: &ReplayAgentConfig,
    rng: &mut RngStream,
) -> Result<ReplayDiagnostics> {
    match agent {
        ReplayAgent::Discrete(a) => a.update(batch, cfg),
        ReplayAgent::Continuous(a) => a.update(batch, cfg, rng),
    }
}

/// Off-policy trainer. Each new sample's channel is drawn from a per-sample
/// schedule before it enters the window and the buffer.
pub struct ReplayTrainer {
    config: ReplayAgentConfig,
    rollout: Rollout,
    agent: ReplayAgent,
    buffer: ReplayBuffer,
    schedule: MixingSchedule,
    policy_rng: RngStream,
    minibatch_rng: RngStream,
    total_steps: u64,
    steps_done: u64,
    iteration: u64,
    current: Option<(Vec<f64>, Channel)>,
    meta: BTreeMap<String, String>,
}

impl ReplayTrainer {
    /// `total_steps` sets the length of the epsilon schedule.
    pub fn new(
        config: ReplayAgentConfig,
        env: Box<dyn Environment>,
        horizon: usize,
        schedule: MixingSchedule,
        total_steps: u64,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let rollout = Rollout::new(env, horizon, RngStream::new(seed, "env"));
        let input = rollout.history_dim();
        let mut init = RngStream::new(seed, "init");
        let agent = match &rollout.spec().action_space {
            ActionSpace::Discrete(n) => ReplayAgent::Discrete(DiscreteReplayAgent::new(input, *n, &config, &mut init)?),
            space => ReplayAgent::Continuous(ContinuousReplayAgent::new(input, space.clone(), &config, &mut init)?),
        };
        Ok(Self {
            buffer: ReplayBuffer::new(config.buffer_capacity)?,
            config,
            rollout,
            agent,
            schedule,
            policy_rng: RngStream::new(seed, "policy"),
            minibatch_rng: RngStream::new(seed, "minibatch"),
            total_steps,
            steps_done: 0,
            iteration: 0,
            current: None,
            meta: BTreeMap::new(),
        })
    }

    pub fn set_meta(&mut self, key: &str, value: String) {
        self.meta.insert(key.to_string(), value);
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn agent(&self) -> &ReplayAgent {
        &self.agent
    }

    fn entropy(&self, epsilon: f64) -> f64 {
        match &self.agent {
            ReplayAgent::Discrete(a) => {
                let n = a.n_actions as f64;
                let p_best = 1.0 - epsilon + epsilon / n;
                let p_other = epsilon / n;
                let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
                h(p_best) + (n - 1.0) * h(p_other)
            }
            ReplayAgent::Continuous(a) => a
                .actor
                .log_std
                .iter()
                .flatten()
                .map(|ls| 0.5 * (1.0 + (2.0 * std::f64::consts::PI).ln() + 2.0 * ls))
                .sum(),
        }
    }
}

impl Trainer for ReplayTrainer {
    fn run_iteration(&mut self) -> Result<IterationReport> {
        let steps = self.config.steps_per_iteration;
        let mut report = IterationReport {
            timesteps: steps,
            ..IterationReport::default()
        };
        let mut partial = 0u64;
        let mut entropy = 0.0;
        for _ in 0..steps {
            let (h, c) = match self.current.take() {
                Some(hc) => hc,
                None => {
                    let c = self.schedule.insertion_channel();
                    (self.rollout.observe(c)?, c)
                }
            };
            if c == Channel::Partial {
                partial += 1;
            }
            let epsilon = self.config.epsilon(self.steps_done, self.total_steps);
            entropy += self.entropy(epsilon);
            let action = match &self.agent {
                ReplayAgent::Discrete(a) => a.act(&h, epsilon, &mut self.policy_rng)?,
                ReplayAgent::Continuous(a) => a.act(&h, &mut self.policy_rng)?,
            };
            let out = self.rollout.step(action)?;
            let next_c = self.schedule.insertion_channel();
            let next_h = self.rollout.peek_next_history(next_c)?;
            let done = out.sample.done;
            self.buffer.insert(Transition {
                history: h,
                action: out.sample.action,
                reward: out.sample.reward,
                next_history: next_h.clone(),
                terminal: done && !out.sample.truncated,
            });
            if let Some(ep) = out.finished {
                report.episodes.push(ep);
            }
            if !done {
                let observed = self.rollout.observe(next_c)?;
                debug_assert_eq!(observed, next_h);
                self.current = Some((observed, next_c));
            }
            self.steps_done += 1;
            if self.steps_done >= self.config.learning_starts {
                for _ in 0..self.config.gradient_steps_per_env_step {
                    let idx = self.buffer.sample_indices(self.config.batch_size, &mut self.minibatch_rng)?;
                    let batch: Vec<&Transition> = idx.iter().map(|&i| &self.buffer.items[i]).collect();
                    replay_update(&mut self.agent, &batch, &self.config, &mut self.minibatch_rng)?;
                }
            }
        }
        self.iteration += 1;
        report.frac_partial = partial as f64 / steps as f64;
        report.entropy = entropy / steps as f64;
        Ok(report)
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.meta = self.meta.clone();
        ck.meta.insert("agent".into(), "replay".into());
        ck.meta.insert("iteration".into(), self.iteration.to_string());
        match &self.agent {
            ReplayAgent::Discrete(a) => {
                ck.meta.insert("policy_kind".into(), "greedy_q".into());
                ck.nets.insert("q1".into(), a.q[0].clone());
                ck.nets.insert("q2".into(), a.q[1].clone());
            }
            ReplayAgent::Continuous(a) => {
                ck.meta.insert("policy_kind".into(), "squashed".into());
                ck.nets.insert("policy".into(), a.actor.net.clone());
                ck.nets.insert("q1".into(), a.q[0].clone());
                ck.nets.insert("q2".into(), a.q[1].clone());
                if let Some(ls) = &a.actor.log_std {
                    ck.vectors.insert("log_std".into(), ls.clone());
                }
            }
        }
        ck
    }

    fn policy(&self) -> EvalPolicy {
        match &self.agent {
            ReplayAgent::Discrete(a) => EvalPolicy::GreedyQ(a.q[0].clone()),
            ReplayAgent::Continuous(a) => EvalPolicy::Squashed(a.actor.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvConfig;
    use crate::guidance::MixingMode;

    fn t(r: f64) -> Transition {
        Transition {
            history: vec![r],
            action: Action::Discrete(0),
            reward: r,
            next_history: vec![r],
            terminal: false,
        }
    }

    #[test]
    fn fifo_eviction() {
        let mut b = ReplayBuffer::new(3).unwrap();
        for i in 0..4 {
            b.insert(t(i as f64));
        }
        assert_eq!(b.len(), 3);
        let order: Vec<f64> = b.iter_in_order().map(|x| x.reward).collect();
        assert_eq!(order, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sampling_contract() {
        let mut b = ReplayBuffer::new(1000).unwrap();
        assert!(matches!(b.sample(1, &mut RngStream::new(0, "mb")), Err(Error::Usage(_))));
        for i in 0..300 {
            b.insert(t(i as f64));
        }
        let s = b.sample(256, &mut RngStream::new(0, "mb")).unwrap();
        assert_eq!(s.len(), 256);
        assert!(s.iter().all(|x| x.reward >= 0.0 && x.reward < 300.0));
        let a = b.sample_indices(256, &mut RngStream::new(5, "mb")).unwrap();
        let c = b.sample_indices(256, &mut RngStream::new(5, "mb")).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn terminal_and_zero_gamma_targets() {
        let cfg = ReplayAgentConfig {
            hidden_sizes: vec![4],
            ..ReplayAgentConfig::default()
        };
        let agent = DiscreteReplayAgent::new(1, 2, &cfg, &mut RngStream::new(0, "init")).unwrap();
        let mut tr = t(3.5);
        tr.terminal = true;
        assert_eq!(agent.td_target(&tr, 0.99).unwrap(), 3.5);
        tr.terminal = false;
        assert_eq!(agent.td_target(&tr, 0.0).unwrap(), 3.5);

        let space = ActionSpace::Continuous { dim: 1, low: -1.0, high: 1.0 };
        let c = ContinuousReplayAgent::new(1, space, &cfg, &mut RngStream::new(0, "init")).unwrap();
        let tr = Transition {
            action: Action::Continuous(vec![0.2]),
            terminal: true,
            ..t(-2.0)
        };
        assert_eq!(c.td_target(&tr, &cfg, &mut RngStream::new(0, "x")).unwrap(), -2.0);
    }

    #[test]
    fn config_validation() {
        let bad = ReplayAgentConfig {
            buffer_capacity: 10,
            batch_size: 256,
            ..ReplayAgentConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let cfg = ReplayAgentConfig::default();
        assert_eq!(cfg.epsilon(0, 1000), 1.0);
        assert!((cfg.epsilon(50, 1000) - 0.525).abs() < 1e-12);
        assert_eq!(cfg.epsilon(500, 1000), 0.05);
    }

    #[test]
    fn trainer_runs_on_both_action_kinds() {
        let cfg = ReplayAgentConfig {
            batch_size: 16,
            buffer_capacity: 500,
            learning_starts: 50,
            steps_per_iteration: 100,
            hidden_sizes: vec![16],
            ..ReplayAgentConfig::default()
        };
        for env in [EnvConfig::rocksample(3, 1), EnvConfig::blind_lander()] {
            let sched = MixingSchedule::per_sample(150, RngStream::new(0, "guidance"));
            let mut tr = ReplayTrainer::new(cfg.clone(), env.build().unwrap(), 2, sched, 300, 0).unwrap();
            let a = tr.run_iteration().unwrap();
            let b = tr.run_iteration().unwrap();
            assert_eq!(a.timesteps, 100);
            assert!(a.frac_partial < b.frac_partial);
            assert_eq!(tr.buffer().len(), 200);
            tr.checkpoint().to_text().unwrap();
        }
        let sched = MixingSchedule::always_partial(MixingMode::PerSample, RngStream::new(0, "guidance"));
        let mut tr = ReplayTrainer::new(cfg, EnvConfig::rocksample(3, 1).build().unwrap(), 2, sched, 300, 0).unwrap();
        assert_eq!(tr.run_iteration().unwrap().frac_partial, 1.0);
    }
}
