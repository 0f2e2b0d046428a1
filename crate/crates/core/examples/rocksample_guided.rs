//! Trains the batch agent on RockSample(4,4) in the partial and guided
//! regimes and compares final scores.
//!
//! cargo run --release --example rocksample_guided -- [timesteps] [seeds]

use guided_rl::agents::BatchAgentConfig;
use guided_rl::envs::EnvConfig;
use guided_rl::harness::{run, AgentConfig, Regime, RunConfig};

fn main() -> guided_rl::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let timesteps: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);

    for regime in [Regime::Partial, Regime::Guided] {
        let agent = AgentConfig::Batch(BatchAgentConfig::default());
        let mut cfg = RunConfig::new(EnvConfig::rocksample(4, 4), agent, regime);
        cfg.total_timesteps = timesteps;
        cfg.seeds = (0..seeds).collect();
        cfg.output_dir = Some(format!("runs/example_rocksample/{regime}").into());
        let s = run(&cfg)?.score()?;
        println!("{regime:>8}: {:.3} ± {:.3} over {} seeds", s.mean, s.se, s.per_seed.len());
    }
    Ok(())
}
