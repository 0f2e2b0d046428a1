//! Observability schedule: which samples are trained on the full channel and
//! which on the partial one.
//!
//! In batch mode iteration `i` turns `floor(|T| * i / N_MIX)` samples partial
//! (all of them once `i >= N_MIX`). In per-sample mode, used with replay
//! buffers, each incoming sample is made partial with probability
//! `min(1, n_current / n_mix)`.

use serde::{Deserialize, Serialize};

use crate::envs::ActionSpace;
use crate::error::{config, usage, Result};
use crate::history::HistoryWindow;
use crate::obs::{Action, Channel, TransitionSample};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingMode {
    Batch,
    PerSample,
}

/// Which samples of a batch become partial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The first `partial_count` samples in collection order.
    #[default]
    Prefix,
    /// A seeded uniformly random subset of size `partial_count`.
    Random,
}

/// The `guidance` table of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GuidanceConfig {
    /// Unset: batch mode for batch agents, per-sample for replay agents.
    pub mode: Option<MixingMode>,
    /// N_MIX as a fraction of the total iteration count. `inf` keeps every
    /// sample full for the whole run.
    pub nmix_fraction: f64,
    pub selection: Selection,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            mode: None,
            nmix_fraction: 0.5,
            selection: Selection::Prefix,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nmix_fraction.is_nan() || self.nmix_fraction < 0.0 {
            return config(format!(
                "guidance.nmix_fraction must be >= 0 (or inf), got {}",
                self.nmix_fraction
            ));
        }
        Ok(())
    }

    /// N_MIX in iterations; `None` means mixing never starts.
    pub fn nmix_iterations(&self, max_iterations: u64) -> Option<u64> {
        if self.nmix_fraction.is_infinite() {
            None
        } else {
            Some((self.nmix_fraction * max_iterations as f64).floor() as u64)
        }
    }
}

/// `floor(max_iterations / 2)`.
pub fn default_nmix(max_iterations: u64) -> u64 {
    max_iterations / 2
}

#[derive(Debug, Clone)]
pub struct MixingSchedule {
    mode: MixingMode,
    selection: Selection,
    /// `None`: never mix (always full).
    nmix: Option<u64>,
    n_mix_samples: Option<u64>,
    iteration: u64,
    n_current: u64,
    rng: RngStream,
}

impl MixingSchedule {
    /// Batch-mode schedule with N_MIX = `nmix` iterations.
    pub fn batch(nmix: u64, selection: Selection, rng: RngStream) -> Self {
        Self {
            mode: MixingMode::Batch,
            selection,
            nmix: Some(nmix),
            n_mix_samples: None,
            iteration: 0,
            n_current: 0,
            rng,
        }
    }

    /// Per-sample schedule that reaches all-partial after `n_mix` samples.
    pub fn per_sample(n_mix: u64, rng: RngStream) -> Self {
        Self {
            mode: MixingMode::PerSample,
            selection: Selection::Prefix,
            nmix: None,
            n_mix_samples: Some(n_mix),
            iteration: 0,
            n_current: 0,
            rng,
        }
    }

    /// Partial from the first sample on.
    pub fn always_partial(mode: MixingMode, rng: RngStream) -> Self {
        match mode {
            MixingMode::Batch => Self::batch(0, Selection::Prefix, rng),
            MixingMode::PerSample => Self::per_sample(0, rng),
        }
    }

    /// Full for the whole run.
    pub fn always_full(mode: MixingMode, rng: RngStream) -> Self {
        Self {
            mode,
            selection: Selection::Prefix,
            nmix: None,
            n_mix_samples: None,
            iteration: 0,
            n_current: 0,
            rng,
        }
    }

    /// Builds the schedule for a run of `max_iterations` iterations with
    /// `samples_per_iteration` environment steps each.
    /// `default_mode` applies when the config leaves the mode unset.
    pub fn from_config(
        cfg: &GuidanceConfig,
        default_mode: MixingMode,
        max_iterations: u64,
        samples_per_iteration: u64,
        rng: RngStream,
    ) -> Result<Self> {
        cfg.validate()?;
        let nmix = cfg.nmix_iterations(max_iterations);
        Ok(match (cfg.mode.unwrap_or(default_mode), nmix) {
            (mode, None) => Self::always_full(mode, rng),
            (MixingMode::Batch, Some(n)) => Self::batch(n, cfg.selection, rng),
            (MixingMode::PerSample, Some(n)) => Self::per_sample(n.saturating_mul(samples_per_iteration), rng),
        })
    }

    pub fn mode(&self) -> MixingMode {
        self.mode
    }

    pub fn nmix(&self) -> Option<u64> {
        self.nmix
    }

    pub fn n_mix_samples(&self) -> Option<u64> {
        self.n_mix_samples
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn n_current(&self) -> u64 {
        self.n_current
    }

    pub fn set_iteration(&mut self, i: u64) -> Result<()> {
        if i < self.iteration {
            return usage(format!("iteration cannot go back from {} to {i}", self.iteration));
        }
        self.iteration = i;
        Ok(())
    }

    pub fn advance_iteration(&mut self) {
        self.iteration += 1;
    }

    /// Number of partial samples in a set of `set_size` at the current iteration.
    pub fn partial_count(&self, set_size: usize) -> usize {
        partial_count(set_size, self.iteration, self.nmix)
    }

    /// Channel for every sample of a batch of `set_size`, in collection order.
    /// A per-sample schedule draws each channel independently.
    pub fn channels_for_batch(&mut self, set_size: usize) -> Vec<Channel> {
        if self.mode == MixingMode::PerSample {
            return (0..set_size).map(|_| self.insertion_channel()).collect();
        }
        let k = self.partial_count(set_size);
        let mut channels = vec![Channel::Full; set_size];
        match self.selection {
            Selection::Prefix => channels[..k].fill(Channel::Partial),
            Selection::Random => {
                if k == set_size {
                    channels.fill(Channel::Partial);
                } else if k > 0 {
                    let mut idx: Vec<usize> = (0..set_size).collect();
                    self.rng.shuffle(&mut idx);
                    for &i in &idx[..k] {
                        channels[i] = Channel::Partial;
                    }
                }
            }
        }
        channels
    }

    /// Probability that the next inserted sample is partial.
    pub fn insertion_probability(&self) -> f64 {
        match self.n_mix_samples {
            None => 0.0,
            Some(0) => 1.0,
            Some(n) => (self.n_current as f64 / n as f64).min(1.0),
        }
    }

    /// Per-sample mode: picks the channel of the next sample and advances
    /// `n_current`.
    pub fn insertion_channel(&mut self) -> Channel {
        let p = self.insertion_probability();
        let partial = match self.n_mix_samples {
            Some(n) if self.n_current >= n => true,
            None => false,
            _ => self.rng.uniform() < p,
        };
        self.n_current += 1;
        if partial {
            Channel::Partial
        } else {
            Channel::Full
        }
    }

    /// Jumps the per-sample counter, e.g. to probe the schedule mid-run.
    pub fn set_n_current(&mut self, n: u64) -> Result<()> {
        if n < self.n_current {
            return usage(format!("n_current cannot go back from {} to {n}", self.n_current));
        }
        self.n_current = n;
        Ok(())
    }
}

/// `min(|T|, floor(|T| * i / N_MIX))`, `|T|` when `N_MIX == 0` or `i >= N_MIX`,
/// and 0 when mixing is disabled (`nmix == None`).
pub fn partial_count(set_size: usize, iteration: u64, nmix: Option<u64>) -> usize {
    match nmix {
        None => 0,
        Some(0) => set_size,
        Some(n) if iteration >= n => set_size,
        Some(n) => ((set_size as u128 * iteration as u128) / n as u128).min(set_size as u128) as usize,
    }
}

/// Histories for a run of samples given their channels.
///
/// `start` is the window before the first sample and `start_prev_action`
/// the action taken just before it (ignored when the first sample opens an
/// episode). Every sample contributes exactly one frame, built from the
/// channel assigned to it, so a frame looks the same in every window that
/// contains it.
pub fn apply_batch(
    start: &HistoryWindow,
    start_prev_action: &[f64],
    samples: &[TransitionSample],
    channels: &[Channel],
    action_space: &ActionSpace,
) -> Result<Vec<Vec<f64>>> {
    if samples.len() != channels.len() {
        return usage(format!(
            "{} samples but {} channel assignments",
            samples.len(),
            channels.len()
        ));
    }
    let mut window = start.clone();
    let zero_action = vec![0.0; action_space.encoding_dim()];
    let mut prev_action = start_prev_action.to_vec();
    let mut out = Vec::with_capacity(samples.len());
    let mut prev_episode: Option<u64> = None;
    for (s, &c) in samples.iter().zip(channels) {
        let fresh = s.step_index == 0 || prev_episode.is_some_and(|e| e != s.episode_id);
        if fresh {
            window.reset();
            prev_action.clone_from(&zero_action);
        }
        window.push(c.flag(), s.obs.channel(c), &prev_action)?;
        out.push(window.flatten());
        prev_action = encode(action_space, &s.action);
        prev_episode = Some(s.episode_id);
    }
    Ok(out)
}

fn encode(space: &ActionSpace, a: &Action) -> Vec<f64> {
    space.encode(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::ObservationPair;
    use proptest::prelude::*;

    fn rng() -> RngStream {
        RngStream::new(0, "guidance")
    }

    #[test]
    fn partial_count_examples() {
        assert_eq!(partial_count(5000, 0, Some(500)), 0);
        assert_eq!(partial_count(5000, 250, Some(500)), 2500);
        assert_eq!(partial_count(5000, 700, Some(500)), 5000);
        assert_eq!(partial_count(5000, 0, Some(0)), 5000);
        assert_eq!(partial_count(5000, 10_000, None), 0);
        assert_eq!(partial_count(7, 1, Some(3)), 2);
    }

    #[test]
    fn default_nmix_examples() {
        assert_eq!(default_nmix(1000), 500);
        assert_eq!(default_nmix(1), 0);
        assert_eq!(default_nmix(2), 1);
    }

    #[test]
    fn batch_channels_prefix() {
        let mut s = MixingSchedule::batch(4, Selection::Prefix, rng());
        assert!(s.channels_for_batch(8).iter().all(|&c| c == Channel::Full));
        s.set_iteration(1).unwrap();
        let c = s.channels_for_batch(8);
        assert_eq!(c[..2], [Channel::Partial; 2]);
        assert!(c[2..].iter().all(|&c| c == Channel::Full));
        s.set_iteration(4).unwrap();
        assert!(s.channels_for_batch(8).iter().all(|&c| c == Channel::Partial));
        assert!(s.set_iteration(3).is_err());
    }

    #[test]
    fn random_selection_has_exact_count() {
        let mut s = MixingSchedule::batch(10, Selection::Random, rng());
        s.set_iteration(3).unwrap();
        let c = s.channels_for_batch(100);
        assert_eq!(c.iter().filter(|&&c| c == Channel::Partial).count(), 30);
        assert_ne!(c[..30], [Channel::Partial; 30]);
    }

    #[test]
    fn nmix_zero_is_always_partial() {
        let mut s = MixingSchedule::batch(0, Selection::Prefix, rng());
        assert!(s.channels_for_batch(5).iter().all(|&c| c == Channel::Partial));
    }

    #[test]
    fn always_full_never_mixes() {
        let mut s = MixingSchedule::always_full(MixingMode::Batch, rng());
        s.set_iteration(u64::MAX).unwrap();
        assert_eq!(s.partial_count(5000), 0);
        let mut p = MixingSchedule::always_full(MixingMode::PerSample, rng());
        for _ in 0..1000 {
            assert_eq!(p.insertion_channel(), Channel::Full);
        }
    }

    #[test]
    fn insertion_probability_endpoints() {
        let mut s = MixingSchedule::per_sample(100, rng());
        for _ in 0..1 {
            assert_eq!(s.insertion_channel(), Channel::Full);
        }
        s.set_n_current(100).unwrap();
        for _ in 0..1000 {
            assert_eq!(s.insertion_channel(), Channel::Partial);
        }
    }

    #[test]
    fn insertion_frequency_at_half() {
        let n_mix = 1_000_000_000u64;
        let draws = 100_000;
        let mut s = MixingSchedule::per_sample(n_mix, rng());
        s.set_n_current(n_mix / 2).unwrap();
        let partial = (0..draws).filter(|_| s.insertion_channel() == Channel::Partial).count();
        let freq = partial as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn from_config_resolves_nmix() {
        let cfg = GuidanceConfig::default();
        let s = MixingSchedule::from_config(&cfg, MixingMode::Batch, 60, 5000, rng()).unwrap();
        assert_eq!(s.nmix(), Some(30));
        let s = MixingSchedule::from_config(&cfg, MixingMode::PerSample, 60, 1000, rng()).unwrap();
        assert_eq!(s.n_mix_samples(), Some(30_000));
        let bad = GuidanceConfig {
            nmix_fraction: -0.1,
            ..GuidanceConfig::default()
        };
        assert!(MixingSchedule::from_config(&bad, MixingMode::Batch, 10, 10, rng()).is_err());
        let inf = GuidanceConfig {
            nmix_fraction: f64::INFINITY,
            ..GuidanceConfig::default()
        };
        let s = MixingSchedule::from_config(&inf, MixingMode::Batch, 10, 10, rng()).unwrap();
        assert_eq!(s.nmix(), None);
    }

    fn sample(ep: u64, t: u64, full: [f64; 2], action: usize) -> TransitionSample {
        TransitionSample {
            obs: ObservationPair::new(full.to_vec(), vec![full[0], 0.0]),
            action: Action::Discrete(action),
            reward: 0.0,
            done: false,
            truncated: false,
            episode_id: ep,
            step_index: t,
        }
    }

    #[test]
    fn apply_batch_frame_consistency() {
        let space = ActionSpace::Discrete(2);
        let window = HistoryWindow::new(1, 2, 2);
        let samples = vec![
            sample(0, 0, [1.0, 2.0], 1),
            sample(0, 1, [3.0, 4.0], 0),
            sample(1, 0, [5.0, 6.0], 1),
        ];
        let ch = [Channel::Partial, Channel::Full, Channel::Partial];
        let h = apply_batch(&window, &[0.0, 0.0], &samples, &ch, &space).unwrap();
        assert_eq!(h[0], vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h[1], vec![1.0, 3.0, 4.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(h[2], vec![0.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(apply_batch(&window, &[0.0, 0.0], &samples, &ch[..2], &space).is_err());
    }

    proptest! {
        #[test]
        fn partial_count_monotone_and_saturating(size in 0usize..20_000, nmix in 0u64..2000, i in 0u64..4000) {
            let a = partial_count(size, i, Some(nmix));
            let b = partial_count(size, i + 1, Some(nmix));
            prop_assert!(a <= b);
            prop_assert!(b <= size);
            if i >= nmix {
                prop_assert_eq!(a, size);
            }
        }

        #[test]
        fn terminal_purity(n_mix in 0u64..50, extra in 0u64..50, seed in any::<u64>()) {
            let mut s = MixingSchedule::per_sample(n_mix, RngStream::new(seed, "guidance"));
            s.set_n_current(n_mix + extra).unwrap();
            for _ in 0..20 {
                prop_assert_eq!(s.insertion_channel(), Channel::Partial);
            }
        }
    }
}
