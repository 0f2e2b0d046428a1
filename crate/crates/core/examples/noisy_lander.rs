//! Gaussian observation noise (mu = 0, sigma = 0.3) on the partial channel:
//! guided training against training on the noisy channel alone.
//!
//! cargo run --release --example noisy_lander -- [timesteps] [seeds]

use guided_rl::agents::BatchAgentConfig;
use guided_rl::envs::EnvConfig;
use guided_rl::harness::{run, AgentConfig, Regime, RunConfig};

fn main() -> guided_rl::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let timesteps: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(60_000);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);

    for regime in [Regime::Guided, Regime::Partial] {
        let mut cfg = RunConfig::new(EnvConfig::noisy_lander(0.0, 0.3), lander_agent(), regime);
        cfg.total_timesteps = timesteps;
        cfg.seeds = (0..seeds).collect();
        let s = run(&cfg)?.score()?;
        let label = if regime == Regime::Guided { "guided" } else { "noisy only" };
        println!("{label:>10}: {:.2} ± {:.2}", s.mean, s.se);
    }
    Ok(())
}

fn lander_agent() -> AgentConfig {
    AgentConfig::Batch(BatchAgentConfig { timesteps_per_batch: Some(5000), ..BatchAgentConfig::default() })
}
