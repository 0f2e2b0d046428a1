use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use crate::agents::{BatchTrainer, EvalPolicy, Policy, ReplayTrainer, Trainer};
use crate::envs::{discounted_return, EnvConfig};
use crate::error::{Error, Result};
use crate::guidance::MixingSchedule;
use crate::harness::config::{AgentConfig, Regime, RunConfig};
use crate::harness::stats::{bootstrap_ci, final_score, Score};
use crate::history::HistoryWindow;
use crate::nn::Checkpoint;
use crate::obs::Channel;
use crate::rng::RngStream;

pub const METRICS_HEADER: &str = "seed,iteration,timesteps,avg_return,avg_disc_return,entropy,frac_partial,wall_clock_s";
pub const EPISODES_HEADER: &str = "seed,episode,iteration,timesteps,return,disc_return,length";

/// One row of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub seed: u64,
    pub iteration: u64,
    /// Cumulative environment steps at the end of the iteration.
    pub timesteps: u64,
    /// Mean over episodes completed in the iteration (NaN if none).
    pub avg_return: f64,
    pub avg_disc_return: f64,
    pub entropy: f64,
    pub frac_partial: f64,
    pub wall_clock_s: f64,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.iteration,
            self.timesteps,
            self.avg_return,
            self.avg_disc_return,
            self.entropy,
            self.frac_partial,
            self.wall_clock_s
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!("metrics row needs 8 fields: {line:?}")));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let real = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        Ok(Self {
            seed: int(f[0])?,
            iteration: int(f[1])?,
            timesteps: int(f[2])?,
            avg_return: real(f[3])?,
            avg_disc_return: real(f[4])?,
            entropy: real(f[5])?,
            frac_partial: real(f[6])?,
            wall_clock_s: real(f[7])?,
        })
    }
}

/// Reads a metrics CSV written by [`run`].
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Parse(format!("{} is not a metrics file", path.display())));
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRow::parse).collect()
}

/// One completed episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub seed: u64,
    /// Index among this seed's completed episodes.
    pub episode: u64,
    pub iteration: u64,
    /// Cumulative steps at the end of the iteration the episode finished in.
    pub timesteps: u64,
    pub ret: f64,
    pub disc_return: f64,
    pub length: u64,
}

impl EpisodeRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.seed, self.episode, self.iteration, self.timesteps, self.ret, self.disc_return, self.length
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeedStatus {
    Ok,
    Failed(String),
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub status: SeedStatus,
    pub metrics: Vec<MetricsRow>,
    pub episodes: Vec<EpisodeRow>,
    pub checkpoint: Option<Checkpoint>,
    pub elapsed_s: f64,
}

impl SeedRun {
    /// Returns that enter the final score: discounted on discrete tasks.
    pub fn scored_returns(&self, discrete: bool) -> Vec<f64> {
        self.episodes
            .iter()
            .map(|e| if discrete { e.disc_return } else { e.ret })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub discrete: bool,
    pub seeds: Vec<SeedRun>,
}

impl RunResult {
    pub fn seed(&self, seed: u64) -> Option<&SeedRun> {
        self.seeds.iter().find(|s| s.seed == seed)
    }

    pub fn failed(&self) -> Vec<u64> {
        self.seeds
            .iter()
            .filter(|s| s.status != SeedStatus::Ok)
            .map(|s| s.seed)
            .collect()
    }

    /// Final score over the seeds that finished.
    pub fn score(&self) -> Result<Score> {
        let per_seed: Vec<(u64, Vec<f64>)> = self
            .seeds
            .iter()
            .filter(|s| s.status == SeedStatus::Ok)
            .map(|s| (s.seed, s.scored_returns(self.discrete)))
            .collect();
        final_score(&per_seed)
    }
}

/// Schedule implementing `regime` for one seed.
pub fn schedule_for(cfg: &RunConfig, seed: u64) -> Result<MixingSchedule> {
    let rng = RngStream::new(seed, "guidance");
    let mode = cfg
        .guidance
        .as_ref()
        .and_then(|g| g.mode)
        .unwrap_or(cfg.agent.default_mixing_mode());
    Ok(match cfg.regime {
        Regime::Full => MixingSchedule::always_full(mode, rng),
        Regime::Partial => MixingSchedule::always_partial(mode, rng),
        Regime::Guided => MixingSchedule::from_config(
            &cfg.guidance(),
            cfg.agent.default_mixing_mode(),
            cfg.iterations()?,
            cfg.steps_per_iteration()?,
            rng,
        )?,
    })
}

pub fn build_trainer(cfg: &RunConfig, seed: u64) -> Result<Box<dyn Trainer>> {
    let env = cfg.env.build()?;
    let schedule = schedule_for(cfg, seed)?;
    let env_json = serde_json::to_string(&cfg.env).map_err(|e| Error::Config(e.to_string()))?;
    let meta = [
        ("env", env_json),
        ("horizon", cfg.horizon.to_string()),
        ("regime", cfg.regime.to_string()),
        ("seed", seed.to_string()),
    ];
    Ok(match &cfg.agent {
        AgentConfig::Batch(b) => {
            let mut t = BatchTrainer::new(b.clone(), env, cfg.horizon, schedule, seed)?;
            for (k, v) in meta {
                t.set_meta(k, v);
            }
            Box::new(t)
        }
        AgentConfig::Replay(r) => {
            if cfg.regime == Regime::Guided {
                if let Some(n_mix) = schedule.n_mix_samples() {
                    if r.buffer_capacity as u64 > 2 * n_mix {
                        log::warn!(
                            "replay capacity {} exceeds twice n_mix ({n_mix}); full samples will linger in the buffer long after mixing ends",
                            r.buffer_capacity
                        );
                    }
                }
            }
            let mut t = ReplayTrainer::new(r.clone(), env, cfg.horizon, schedule, cfg.total_timesteps, seed)?;
            for (k, v) in meta {
                t.set_meta(k, v);
            }
            Box::new(t)
        }
    })
}

fn nan_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Trains one seed. Errors after construction mark the seed failed rather
/// than propagating.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let iterations = cfg.iterations()?;
    let mut trainer = build_trainer(cfg, seed)?;
    let mut out = SeedRun {
        seed,
        status: SeedStatus::Ok,
        metrics: Vec::with_capacity(iterations as usize),
        episodes: Vec::new(),
        checkpoint: None,
        elapsed_s: 0.0,
    };
    let mut timesteps = 0;
    for i in 0..iterations {
        let report = match trainer.run_iteration() {
            Ok(r) => r,
            Err(e) => {
                log::error!("seed {seed} failed at iteration {i}: {e}");
                out.status = SeedStatus::Failed(format!("iteration {i}: {e}"));
                break;
            }
        };
        timesteps += report.timesteps;
        out.metrics.push(MetricsRow {
            seed,
            iteration: i,
            timesteps,
            avg_return: nan_mean(report.episodes.iter().map(|e| e.ret)),
            avg_disc_return: nan_mean(report.episodes.iter().map(|e| e.disc_return)),
            entropy: report.entropy,
            frac_partial: report.frac_partial,
            wall_clock_s: if cfg.record_wall_clock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        for e in report.episodes {
            out.episodes.push(EpisodeRow {
                seed,
                episode: out.episodes.len() as u64,
                iteration: i,
                timesteps,
                ret: e.ret,
                disc_return: e.disc_return,
                length: e.length,
            });
        }
        log::debug!("seed {seed} iteration {i} done");
    }
    out.checkpoint = Some(trainer.checkpoint());
    out.elapsed_s = start.elapsed().as_secs_f64();
    Ok(out)
}

pub fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn episodes_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("episodes_seed{seed}.csv"))
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("checkpoint_seed{seed}.ckpt"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_seed_files(dir: &Path, s: &SeedRun) -> Result<()> {
    let mut m = String::from(METRICS_HEADER);
    m.push('\n');
    for row in &s.metrics {
        let _ = writeln!(m, "{}", row.csv_line());
    }
    write(&metrics_path(dir, s.seed), &m)?;
    let mut e = String::from(EPISODES_HEADER);
    e.push('\n');
    for row in &s.episodes {
        let _ = writeln!(e, "{}", row.csv_line());
    }
    write(&episodes_path(dir, s.seed), &e)?;
    if let Some(ck) = &s.checkpoint {
        ck.save(&checkpoint_path(dir, s.seed))?;
    }
    Ok(())
}

/// JSON block with mean, SE and bootstrap interval of a score.
pub fn score_json(score: &Result<Score>) -> serde_json::Value {
    match score {
        Ok(s) => {
            let values = s.values();
            let ci = bootstrap_ci(&values, 0.95, 10_000, &mut RngStream::new(0, "bootstrap")).ok();
            json!({
                "mean": s.mean,
                "se": s.se,
                "ci95": ci.map(|(a, b)| vec![a, b]),
                "per_seed": s.per_seed.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
            })
        }
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Trains every seed of `cfg` (in parallel across seeds) and, if an output
/// directory is set, writes per-seed metrics, episodes and checkpoints plus
/// `manifest.json` and `summary.json`.
pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let discrete = cfg.action_space()?.is_discrete();
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write(&dir.join("config.toml"), &cfg.to_toml()?)?;
    }
    let work = |seed: u64| -> Result<SeedRun> {
        let s = run_seed(cfg, seed)?;
        if let Some(dir) = &cfg.output_dir {
            write_seed_files(dir, &s)?;
        }
        Ok(s)
    };
    let seeds: Vec<SeedRun> = if cfg.threads == 1 || cfg.seeds.len() == 1 {
        cfg.seeds.iter().map(|&s| work(s)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| cfg.seeds.par_iter().map(|&s| work(s)).collect::<Result<_>>())?
    };
    let result = RunResult {
        config: cfg.clone(),
        discrete,
        seeds,
    };
    if let Some(dir) = &cfg.output_dir {
        let manifest = json!({
            "regime": cfg.regime.to_string(),
            "iterations": cfg.iterations()?,
            "seeds": result.seeds.iter().map(|s| {
                let mut v = json!({
                    "seed": s.seed,
                    "status": match &s.status { SeedStatus::Ok => "ok", SeedStatus::Failed(_) => "failed" },
                    "iterations_completed": s.metrics.len(),
                    "episodes": s.episodes.len(),
                });
                if let SeedStatus::Failed(msg) = &s.status {
                    v["error"] = json!(msg);
                }
                if cfg.record_wall_clock {
                    v["elapsed_s"] = json!(s.elapsed_s);
                }
                v
            }).collect::<Vec<_>>(),
        });
        write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest).expect("json"))?;
        let summary = json!({
            "metric": if discrete { "last_40_discounted_return" } else { "last_40_return" },
            "regimes": { cfg.regime.to_string(): score_json(&result.score()) },
        });
        write(&dir.join("summary.json"), &serde_json::to_string_pretty(&summary).expect("json"))?;
    }
    Ok(result)
}

/// Returns of a frozen policy acting on the partial channel only.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub returns: Vec<f64>,
    pub disc_returns: Vec<f64>,
}

pub fn evaluate(policy: &EvalPolicy, env: &EnvConfig, horizon: usize, episodes: usize, seed: u64) -> Result<EvalResult> {
    let mut e = env.build()?;
    let spec = e.spec().clone();
    let mut env_rng = RngStream::new(seed, "eval-env");
    let mut act_rng = RngStream::new(seed, "eval-policy");
    let act_dim = spec.action_space.encoding_dim();
    let mut window = HistoryWindow::new(horizon, spec.obs_dim, act_dim);
    let mut out = EvalResult {
        returns: Vec::with_capacity(episodes),
        disc_returns: Vec::with_capacity(episodes),
    };
    for _ in 0..episodes {
        let mut obs = e.reset(&mut env_rng);
        window.reset();
        let mut prev = vec![0.0; act_dim];
        let mut rewards = Vec::new();
        loop {
            window.push(Channel::Partial.flag(), obs.channel(Channel::Partial), &prev)?;
            let a = policy.act(&window.flatten(), &mut act_rng)?;
            prev = spec.action_space.encode(&a);
            let step = e.step(&a, &mut env_rng)?;
            rewards.push(step.reward);
            if step.done() {
                break;
            }
            obs = step.obs;
        }
        out.returns.push(rewards.iter().sum());
        out.disc_returns.push(discounted_return(&rewards, spec.discount));
    }
    Ok(out)
}

/// Rebuilds the evaluation policy, environment and horizon from a checkpoint.
pub fn policy_from_checkpoint(ck: &Checkpoint) -> Result<(EvalPolicy, EnvConfig, usize)> {
    let env: EnvConfig =
        serde_json::from_str(ck.meta("env")?).map_err(|e| Error::Parse(format!("checkpoint env: {e}")))?;
    let horizon: usize = ck
        .meta("horizon")?
        .parse()
        .map_err(|e| Error::Parse(format!("checkpoint horizon: {e}")))?;
    let space = env.build()?.spec().action_space.clone();
    let log_std = ck.vectors.get("log_std").cloned();
    let policy = match ck.meta("policy_kind")? {
        "stochastic" => EvalPolicy::Stochastic(Policy::from_parts(ck.net("policy")?.clone(), log_std, space)?),
        "squashed" => EvalPolicy::Squashed(Policy::from_parts(ck.net("policy")?.clone(), log_std, space)?),
        "greedy_q" => EvalPolicy::GreedyQ(ck.net("q1")?.clone()),
        other => return Err(Error::Parse(format!("unknown policy kind '{other}'"))),
    };
    Ok((policy, env, horizon))
}
