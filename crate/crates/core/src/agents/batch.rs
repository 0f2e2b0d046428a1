use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::gae::{compute_gae, normalize_advantages};
use crate::agents::rollout::{EpisodeRecord, Rollout};
use crate::agents::{EvalPolicy, IterationReport, Policy, Trainer};
use crate::envs::{ActionSpace, Environment};
use crate::error::{config, Error, Result};
use crate::guidance::{apply_batch, MixingSchedule};
use crate::history::HistoryWindow;
use crate::nn::{Activation, Checkpoint, Mlp, Optimizer};
use crate::obs::{Channel, TransitionSample};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchAgentConfig {
    /// Defaults to 5000 for discrete and 2000 for continuous action spaces.
    pub timesteps_per_batch: Option<usize>,
    pub gamma: f64,
    pub lambda: f64,
    pub clip_range: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub learning_rate: f64,
    pub value_iterations: usize,
    pub value_step_size: f64,
    pub value_minibatch_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    /// Entropy bonus weight. Defaults to 0.01 for discrete and 0 for
    /// continuous action spaces.
    pub entropy_coef: Option<f64>,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
    /// Remaining epochs are skipped once a minibatch's estimated KL from the
    /// collecting policy exceeds 1.5 times this value.
    pub target_kl: Option<f64>,
}

impl Default for BatchAgentConfig {
    fn default() -> Self {
        Self {
            timesteps_per_batch: None,
            gamma: 0.99,
            lambda: 0.98,
            clip_range: 0.2,
            epochs: 10,
            minibatches: 32,
            learning_rate: 3e-4,
            value_iterations: 5,
            value_step_size: 1e-3,
            value_minibatch_size: 64,
            hidden_sizes: vec![32, 32],
            activation: Activation::Tanh,
            entropy_coef: None,
            init_log_std: 0.0,
            normalize_advantages: true,
            target_kl: Some(0.01),
        }
    }
}

impl BatchAgentConfig {
    pub fn batch_size(&self, space: &ActionSpace) -> usize {
        self.timesteps_per_batch
            .unwrap_or(if space.is_discrete() { 5000 } else { 2000 })
    }

    pub fn entropy_coef(&self, space: &ActionSpace) -> f64 {
        self.entropy_coef
            .unwrap_or(if space.is_discrete() { 0.01 } else { 0.0 })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return config(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return config(format!("lambda must be in [0, 1], got {}", self.lambda));
        }
        if !(self.clip_range > 0.0) {
            return config(format!("clip_range must be positive, got {}", self.clip_range));
        }
        if self.timesteps_per_batch == Some(0) {
            return config("timesteps_per_batch must be positive");
        }
        if self.minibatches == 0 || self.value_minibatch_size == 0 {
            return config("minibatch counts and sizes must be positive");
        }
        if !(self.learning_rate > 0.0 && self.value_step_size > 0.0) {
            return config("learning rates must be positive");
        }
        if self.entropy_coef.is_some_and(|c| !(c >= 0.0)) {
            return config("entropy_coef must be non-negative");
        }
        if self.target_kl.is_some_and(|k| !(k > 0.0)) {
            return config("target_kl must be positive");
        }
        if self.hidden_sizes.iter().any(|&h| h == 0) {
            return config("hidden layer sizes must be positive");
        }
        Ok(())
    }
}

/// One on-policy sample set together with everything the update needs.
#[derive(Debug, Clone)]
pub struct EpisodeBatch {
    pub samples: Vec<TransitionSample>,
    pub channels: Vec<Channel>,
    /// Policy input for each sample, built from the assigned channels.
    pub histories: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub entropies: Vec<f64>,
    pub values: Vec<f64>,
    /// Value of the history following the last sample.
    pub bootstrap_value: f64,
    /// Rewards with `gamma * V(h')` folded in on time-limit truncations, so
    /// GAE can treat every episode end as terminal.
    pub gae_rewards: Vec<f64>,
    pub episodes: Vec<EpisodeRecord>,
    pub start_window: HistoryWindow,
    pub start_prev_action: Vec<f64>,
}

impl EpisodeBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dones(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.done).collect()
    }

    pub fn partial_fraction(&self) -> f64 {
        let k = self.channels.iter().filter(|&&c| c == Channel::Partial).count();
        k as f64 / self.channels.len().max(1) as f64
    }

    /// Recomputes the histories from the stored samples and channels.
    pub fn rebuild_histories(&self, space: &ActionSpace) -> Result<Vec<Vec<f64>>> {
        apply_batch(
            &self.start_window,
            &self.start_prev_action,
            &self.samples,
            &self.channels,
            space,
        )
    }

    pub fn advantages(&self, gamma: f64, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut values = self.values.clone();
        values.push(self.bootstrap_value);
        compute_gae(&self.gae_rewards, &values, &self.dones(), gamma, lambda)
    }
}

/// Runs the policy for `channels.len()` steps, sample `t` being seen through
/// `channels[t]`.
pub fn collect_batch(
    policy: &Policy,
    value_net: &Mlp,
    rollout: &mut Rollout,
    channels: Vec<Channel>,
    gamma: f64,
    rng: &mut RngStream,
) -> Result<EpisodeBatch> {
    let n = channels.len();
    let (start_window, start_prev_action) = rollout.snapshot();
    let mut samples = Vec::with_capacity(n);
    let mut histories = Vec::with_capacity(n);
    let mut log_probs = Vec::with_capacity(n);
    let mut entropies = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut gae_rewards = Vec::with_capacity(n);
    let mut episodes = Vec::new();
    for &c in &channels {
        let h = rollout.observe(c)?;
        let (action, logp, ent) = policy.act(&h, rng)?;
        values.push(value_net.forward(&h)?[0]);
        let out = rollout.step(action)?;
        let mut r = out.sample.reward;
        if out.sample.truncated {
            r += gamma * value_net.forward(&rollout.peek_next_history(c)?)?[0];
        }
        gae_rewards.push(r);
        if let Some(ep) = out.finished {
            episodes.push(ep);
        }
        samples.push(out.sample);
        histories.push(h);
        log_probs.push(logp);
        entropies.push(ent);
    }
    let bootstrap_value = match channels.last() {
        Some(&c) if !samples.last().is_some_and(|s: &TransitionSample| s.done) => {
            value_net.forward(&rollout.peek_next_history(c)?)?[0]
        }
        _ => 0.0,
    };
    Ok(EpisodeBatch {
        samples,
        channels,
        histories,
        log_probs,
        entropies,
        values,
        bootstrap_value,
        gae_rewards,
        episodes,
        start_window,
        start_prev_action,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateDiagnostics {
    /// Mean entropy of the behaviour policy over the batch.
    pub entropy: f64,
    /// Fraction of ratios outside the clip range, averaged over all minibatches.
    pub clip_fraction: f64,
    /// Clip fraction of each minibatch in update order.
    pub clip_fractions: Vec<f64>,
    pub policy_loss: f64,
    /// Mean squared value error over the final regression pass.
    pub value_loss: f64,
    /// The KL limit ended the policy epochs early.
    pub stopped_early: bool,
}

/// Optimizer state owned by a batch trainer.
#[derive(Debug, Clone)]
pub struct BatchOptimizers {
    pub policy: Optimizer,
    pub log_std: Option<Optimizer>,
    pub value: Optimizer,
}

impl BatchOptimizers {
    pub fn new(policy: &Policy, value: &Mlp, cfg: &BatchAgentConfig) -> Result<Self> {
        Ok(Self {
            policy: Optimizer::adam(cfg.learning_rate, policy.net.num_params())?,
            log_std: match &policy.log_std {
                Some(ls) => Some(Optimizer::adam(cfg.learning_rate, ls.len())?),
                None => None,
            },
            value: Optimizer::adam(cfg.value_step_size, value.num_params())?,
        })
    }
}

fn chunks(indices: &[usize], parts: usize) -> impl Iterator<Item = &[usize]> {
    let n = indices.len();
    let parts = parts.min(n).max(1);
    (0..parts).map(move |i| &indices[i * n / parts..(i + 1) * n / parts])
}

/// Clipped-surrogate policy update followed by value regression.
pub fn batch_update(
    policy: &mut Policy,
    value_net: &mut Mlp,
    opt: &mut BatchOptimizers,
    batch: &EpisodeBatch,
    cfg: &BatchAgentConfig,
    rng: &mut RngStream,
) -> Result<UpdateDiagnostics> {
    let n = batch.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    let (mut adv, returns) = batch.advantages(cfg.gamma, cfg.lambda)?;
    if cfg.normalize_advantages {
        normalize_advantages(&mut adv);
    }
    if adv.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("advantages".into()));
    }

    let eps = cfg.clip_range;
    let entropy_coef = cfg.entropy_coef(&policy.action_space);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut clip_fractions = Vec::new();
    let mut policy_loss = 0.0;
    let mut grads = policy.net.zero_grads();
    let mut std_grads = policy.log_std.as_ref().map(|ls| vec![0.0; ls.len()]);
    let mut stopped_early = false;
    'epochs: for _ in 0..cfg.epochs {
        rng.shuffle(&mut indices);
        for mb in chunks(&indices, cfg.minibatches) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            if let Some(sg) = std_grads.as_mut() {
                sg.iter_mut().for_each(|g| *g = 0.0);
            }
            let m = mb.len() as f64;
            let mut clipped = 0usize;
            let mut loss = 0.0;
            let mut kl = 0.0;
            for &i in mb {
                let cache = policy.net.forward_cached(&batch.histories[i])?;
                let dist = policy.dist_from_output(cache.output());
                let action = &batch.samples[i].action;
                let log_ratio = dist.log_prob(action) - batch.log_probs[i];
                let ratio = log_ratio.exp();
                kl += (ratio - 1.0 - log_ratio) / m;
                let a = adv[i];
                let surr1 = ratio * a;
                let surr2 = ratio.clamp(1.0 - eps, 1.0 + eps) * a;
                loss -= surr1.min(surr2);
                if (ratio - 1.0).abs() > eps {
                    clipped += 1;
                }
                let mut out_grad: Vec<f64>;
                let mut ls_grad: Option<Vec<f64>>;
                if surr1 <= surr2 && a != 0.0 {
                    let coef = -ratio * a / m;
                    let (d_out, d_ls) = dist.grad_log_prob(action);
                    out_grad = d_out.into_iter().map(|g| g * coef).collect();
                    ls_grad = d_ls.map(|v| v.into_iter().map(|g| g * coef).collect());
                } else {
                    out_grad = vec![0.0; cache.output().len()];
                    ls_grad = None;
                }
                if entropy_coef != 0.0 {
                    loss -= entropy_coef * dist.entropy();
                    let (d_out, d_ls) = dist.grad_entropy();
                    let c = -entropy_coef / m;
                    for (o, g) in out_grad.iter_mut().zip(d_out) {
                        *o += c * g;
                    }
                    if let Some(d_ls) = d_ls {
                        let acc = ls_grad.get_or_insert_with(|| vec![0.0; d_ls.len()]);
                        for (o, g) in acc.iter_mut().zip(d_ls) {
                            *o += c * g;
                        }
                    }
                }
                if out_grad.iter().any(|&g| g != 0.0) {
                    policy.net.backward(&cache, &out_grad, &mut grads)?;
                }
                if let (Some(acc), Some(g)) = (std_grads.as_mut(), ls_grad) {
                    for (a, g) in acc.iter_mut().zip(g) {
                        *a += g;
                    }
                }
            }
            if !loss.is_finite() {
                return Err(Error::NonFinite("policy surrogate loss".into()));
            }
            if cfg.target_kl.is_some_and(|t| kl > 1.5 * t) {
                stopped_early = true;
                break 'epochs;
            }
            policy_loss = loss / m;
            clip_fractions.push(clipped as f64 / m);
            opt.policy.step(&mut policy.net, &grads)?;
            if let (Some(o), Some(ls), Some(g)) = (opt.log_std.as_mut(), policy.log_std.as_mut(), std_grads.as_ref()) {
                o.step_slice(ls, g)?;
            }
        }
    }
    if !policy.net.all_finite() || policy.log_std.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("policy parameters".into()));
    }

    let mut vgrads = value_net.zero_grads();
    let mut value_loss = 0.0;
    for _ in 0..cfg.value_iterations {
        rng.shuffle(&mut indices);
        let mut total = 0.0;
        for mb in indices.chunks(cfg.value_minibatch_size) {
            vgrads.iter_mut().for_each(|g| *g = 0.0);
            let m = mb.len() as f64;
            for &i in mb {
                let cache = value_net.forward_cached(&batch.histories[i])?;
                let err = cache.output()[0] - returns[i];
                total += err * err;
                value_net.backward(&cache, &[2.0 * err / m], &mut vgrads)?;
            }
            opt.value.step(value_net, &vgrads)?;
        }
        value_loss = total / n as f64;
        if !value_loss.is_finite() {
            return Err(Error::NonFinite("value loss".into()));
        }
    }

    let clip_fraction = if clip_fractions.is_empty() {
        0.0
    } else {
        clip_fractions.iter().sum::<f64>() / clip_fractions.len() as f64
    };
    Ok(UpdateDiagnostics {
        entropy: batch.entropies.iter().sum::<f64>() / n as f64,
        clip_fraction,
        clip_fractions,
        policy_loss,
        value_loss,
        stopped_early,
    })
}

/// On-policy trainer: collect a batch, assign channels per the schedule,
/// update, repeat.
pub struct BatchTrainer {
    config: BatchAgentConfig,
    rollout: Rollout,
    policy: Policy,
    value: Mlp,
    opt: BatchOptimizers,
    schedule: MixingSchedule,
    policy_rng: RngStream,
    minibatch_rng: RngStream,
    batch_size: usize,
    iteration: u64,
    meta: BTreeMap<String, String>,
    last_diagnostics: Option<UpdateDiagnostics>,
}

impl BatchTrainer {
    pub fn new(
        config: BatchAgentConfig,
        env: Box<dyn Environment>,
        horizon: usize,
        schedule: MixingSchedule,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let rollout = Rollout::new(env, horizon, RngStream::new(seed, "env"));
        let space = rollout.spec().action_space.clone();
        let input = rollout.history_dim();
        let mut init = RngStream::new(seed, "init");
        let policy = Policy::new(
            input,
            &config.hidden_sizes,
            config.activation,
            space.clone(),
            config.init_log_std,
            &mut init,
        )?;
        let mut sizes = vec![input];
        sizes.extend_from_slice(&config.hidden_sizes);
        sizes.push(1);
        let value = Mlp::new(&sizes, config.activation, Activation::Identity, &mut init)?;
        let opt = BatchOptimizers::new(&policy, &value, &config)?;
        Ok(Self {
            batch_size: config.batch_size(&space),
            config,
            rollout,
            policy,
            value,
            opt,
            schedule,
            policy_rng: RngStream::new(seed, "policy"),
            minibatch_rng: RngStream::new(seed, "minibatch"),
            iteration: 0,
            meta: BTreeMap::new(),
            last_diagnostics: None,
        })
    }

    /// Extra key/value pairs written into checkpoints.
    pub fn set_meta(&mut self, key: &str, value: String) {
        self.meta.insert(key.to_string(), value);
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn value_net(&self) -> &Mlp {
        &self.value
    }

    pub fn schedule(&self) -> &MixingSchedule {
        &self.schedule
    }

    pub fn last_diagnostics(&self) -> Option<&UpdateDiagnostics> {
        self.last_diagnostics.as_ref()
    }

    /// Collects the next batch without updating.
    pub fn collect(&mut self) -> Result<EpisodeBatch> {
        let channels = self.schedule.channels_for_batch(self.batch_size);
        collect_batch(
            &self.policy,
            &self.value,
            &mut self.rollout,
            channels,
            self.config.gamma,
            &mut self.policy_rng,
        )
    }

    pub fn update(&mut self, batch: &EpisodeBatch) -> Result<UpdateDiagnostics> {
        batch_update(
            &mut self.policy,
            &mut self.value,
            &mut self.opt,
            batch,
            &self.config,
            &mut self.minibatch_rng,
        )
    }
}

impl Trainer for BatchTrainer {
    fn run_iteration(&mut self) -> Result<IterationReport> {
        let batch = self.collect()?;
        let diag = self.update(&batch)?;
        self.schedule.advance_iteration();
        self.iteration += 1;
        let report = IterationReport {
            timesteps: batch.len() as u64,
            frac_partial: batch.partial_fraction(),
            entropy: diag.entropy,
            episodes: batch.episodes,
        };
        self.last_diagnostics = Some(diag);
        Ok(report)
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.meta = self.meta.clone();
        ck.meta.insert("agent".into(), "batch".into());
        ck.meta.insert("policy_kind".into(), "stochastic".into());
        ck.meta.insert("iteration".into(), self.iteration.to_string());
        ck.nets.insert("policy".into(), self.policy.net.clone());
        ck.nets.insert("value".into(), self.value.clone());
        if let Some(ls) = &self.policy.log_std {
            ck.vectors.insert("log_std".into(), ls.clone());
        }
        ck
    }

    fn policy(&self) -> EvalPolicy {
        EvalPolicy::Stochastic(self.policy.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{EnvConfig, ActionSpace};
    use crate::guidance::Selection;
    use crate::obs::Action;

    fn small_config() -> BatchAgentConfig {
        BatchAgentConfig {
            timesteps_per_batch: Some(300),
            minibatches: 4,
            epochs: 2,
            hidden_sizes: vec![8],
            ..BatchAgentConfig::default()
        }
    }

    fn trainer(schedule: MixingSchedule, seed: u64) -> BatchTrainer {
        let env = EnvConfig::rocksample(3, 2).build().unwrap();
        BatchTrainer::new(small_config(), env, 2, schedule, seed).unwrap()
    }

    fn full() -> MixingSchedule {
        MixingSchedule::batch(4, Selection::Prefix, RngStream::new(0, "guidance"))
    }

    #[test]
    fn batch_has_exact_size_and_contiguous_episodes() {
        let mut t = trainer(full(), 1);
        let b = t.collect().unwrap();
        assert_eq!(b.len(), 300);
        for w in b.samples.windows(2) {
            if w[0].done {
                assert_eq!(w[1].episode_id, w[0].episode_id + 1);
                assert_eq!(w[1].step_index, 0);
            } else {
                assert_eq!(w[1].episode_id, w[0].episode_id);
                assert_eq!(w[1].step_index, w[0].step_index + 1);
            }
        }
        let done = b.samples.iter().filter(|s| s.done).count();
        assert_eq!(done, b.episodes.len());
    }

    #[test]
    fn histories_match_rebuild_across_batches() {
        let mut sched = MixingSchedule::batch(3, Selection::Random, RngStream::new(0, "guidance"));
        sched.set_iteration(1).unwrap();
        let mut t = trainer(sched, 2);
        let space = ActionSpace::Discrete(7);
        for _ in 0..3 {
            let b = t.collect().unwrap();
            assert_eq!(b.rebuild_histories(&space).unwrap(), b.histories);
        }
    }

    #[test]
    fn same_seed_same_batch() {
        let a = trainer(full(), 9).collect().unwrap();
        let b = trainer(full(), 9).collect().unwrap();
        assert_eq!(a.histories, b.histories);
        assert_eq!(a.log_probs, b.log_probs);
    }

    fn single_sample_batch(adv_reward: f64) -> (Policy, Mlp, EpisodeBatch) {
        let mut rng = RngStream::new(1, "init");
        let space = ActionSpace::Discrete(3);
        let policy = Policy::new(4, &[8], Activation::Tanh, space, 0.0, &mut rng).unwrap();
        let value = Mlp::zeros(&[4, 1], Activation::Tanh, Activation::Identity).unwrap();
        let h = vec![0.5, -0.2, 1.0, 0.0];
        let logp = policy.distribution(&h).unwrap().log_prob(&Action::Discrete(1));
        let sample = TransitionSample {
            obs: crate::obs::ObservationPair::fully_observed(vec![0.0]),
            action: Action::Discrete(1),
            reward: adv_reward,
            done: true,
            truncated: false,
            episode_id: 0,
            step_index: 0,
        };
        let batch = EpisodeBatch {
            samples: vec![sample],
            channels: vec![Channel::Full],
            histories: vec![h],
            log_probs: vec![logp],
            entropies: vec![0.0],
            values: vec![0.0],
            bootstrap_value: 0.0,
            gae_rewards: vec![adv_reward],
            episodes: vec![],
            start_window: HistoryWindow::new(0, 1, 3),
            start_prev_action: vec![0.0; 3],
        };
        (policy, value, batch)
    }

    #[test]
    fn positive_advantage_raises_log_prob() {
        let (mut policy, mut value, batch) = single_sample_batch(1.0);
        let cfg = BatchAgentConfig::default();
        let mut opt = BatchOptimizers::new(&policy, &value, &cfg).unwrap();
        let before = policy.distribution(&batch.histories[0]).unwrap().log_prob(&Action::Discrete(1));
        let d = batch_update(&mut policy, &mut value, &mut opt, &batch, &cfg, &mut RngStream::new(0, "mb")).unwrap();
        let after = policy.distribution(&batch.histories[0]).unwrap().log_prob(&Action::Discrete(1));
        assert!(after > before);
        assert_eq!(d.clip_fractions[0], 0.0);
        assert!(d.clip_fractions.iter().all(|c| (0.0..=1.0).contains(c)));
    }

    #[test]
    fn zero_advantage_leaves_policy_unchanged() {
        let (mut policy, mut value, batch) = single_sample_batch(0.0);
        let cfg = BatchAgentConfig {
            entropy_coef: Some(0.0),
            ..BatchAgentConfig::default()
        };
        let mut opt = BatchOptimizers::new(&policy, &value, &cfg).unwrap();
        let before = policy.clone();
        batch_update(&mut policy, &mut value, &mut opt, &batch, &cfg, &mut RngStream::new(0, "mb")).unwrap();
        assert_eq!(policy, before);
    }

    #[test]
    fn trainer_iteration_reports() {
        let mut t = trainer(full(), 3);
        let r = t.run_iteration().unwrap();
        assert_eq!(r.timesteps, 300);
        assert_eq!(r.frac_partial, 0.0);
        let r = t.run_iteration().unwrap();
        assert_eq!(r.frac_partial, 75.0 / 300.0);
        assert_eq!(t.iteration(), 2);
        let ck = t.checkpoint();
        assert!(ck.net("policy").is_ok() && ck.net("value").is_ok());
    }

    #[test]
    fn continuous_policy_has_log_std() {
        let env = EnvConfig::blind_lander().build().unwrap();
        let mut t = BatchTrainer::new(small_config(), env, 1, full(), 0).unwrap();
        t.run_iteration().unwrap();
        assert!(t.checkpoint().vector("log_std").is_ok());
    }
}
