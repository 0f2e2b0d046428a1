use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use guided_rl::envs::EnvConfig;
use guided_rl::harness::{self, Regime, RunConfig};
use guided_rl::harness::{evaluate, plot_metrics, policy_from_checkpoint, sweep_nmix};
use guided_rl::nn::Checkpoint;
use guided_rl::Result;

#[derive(Parser)]
#[command(name = "guided-rl", version, about = "Train, evaluate and compare observability-guided RL agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Comma-separated seeds, e.g. 0,1,2
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    timesteps: Option<u64>,
    #[arg(long)]
    regime: Option<Regime>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a run config
    Train {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a checkpointed policy on the partial observation channel
    Eval {
        checkpoint: PathBuf,
        /// Environment shorthand (rocksample:N:K, blind_lander, noisy_lander);
        /// defaults to the one stored in the checkpoint
        #[arg(long)]
        env: Option<String>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the unguided baseline with guided runs at several N_MIX fractions
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Draw learning curves with bootstrap bands from metrics files
    Plot {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "avg_return")]
        metric: String,
    },
}

fn load(path: &PathBuf, o: Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = o.seeds {
        cfg.seeds = s;
    }
    if let Some(t) = o.timesteps {
        cfg.total_timesteps = t;
    }
    if let Some(r) = o.regime {
        cfg.regime = r;
        if r == Regime::Guided && cfg.guidance.is_none() {
            cfg.guidance = Some(Default::default());
        }
    }
    if let Some(d) = o.out {
        cfg.output_dir = Some(d);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_score(label: &str, result: &harness::RunResult) {
    match result.score() {
        Ok(s) => println!("{label}: {:.4} ± {:.4} (n={})", s.mean, s.se, s.per_seed.len()),
        Err(e) => println!("{label}: no score ({e})"),
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, overrides } => {
            let cfg = load(&config, overrides)?;
            let result = harness::run(&cfg)?;
            print_score(&cfg.regime.to_string(), &result);
            let failed = result.failed();
            if !failed.is_empty() {
                eprintln!("failed seeds: {failed:?}");
            }
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let (policy, stored_env, horizon) = policy_from_checkpoint(&ck)?;
            let env = match env {
                Some(s) => EnvConfig::from_shorthand(&s)?,
                None => stored_env,
            };
            let r = evaluate(&policy, &env, horizon, episodes, seed)?;
            let n = episodes as f64;
            println!("episodes: {episodes}");
            println!("mean return: {:.4}", r.returns.iter().sum::<f64>() / n);
            println!("mean discounted return: {:.4}", r.disc_returns.iter().sum::<f64>() / n);
        }
        Command::Sweep {
            config,
            fractions,
            overrides,
        } => {
            let cfg = load(&config, overrides)?;
            let result = sweep_nmix(&cfg, &fractions)?;
            for e in std::iter::once(&result.baseline).chain(&result.guided) {
                match (&e.score, &e.error) {
                    (Some(s), _) => println!("{}: {:.4} ± {:.4}", e.label, s.mean, s.se),
                    (None, err) => println!("{}: no score ({})", e.label, err.as_deref().unwrap_or("unknown")),
                }
            }
            println!("every guided run >= unguided: {}", result.guided_at_least_baseline());
        }
        Command::Plot { metrics, out, metric } => plot_metrics(&metrics, &metric, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
