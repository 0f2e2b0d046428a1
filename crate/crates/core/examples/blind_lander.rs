//! Full, guided and partial training on BlindLander, where the partial
//! channel goes dark inside an altitude band.
//!
//! cargo run --release --example blind_lander -- [timesteps] [seeds]

use guided_rl::agents::BatchAgentConfig;
use guided_rl::envs::EnvConfig;
use guided_rl::harness::{run, AgentConfig, Regime, RunConfig};

fn main() -> guided_rl::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let timesteps: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(60_000);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);

    for regime in [Regime::Full, Regime::Guided, Regime::Partial] {
        let mut cfg = RunConfig::new(EnvConfig::blind_lander(), lander_agent(), regime);
        cfg.total_timesteps = timesteps;
        cfg.seeds = (0..seeds).collect();
        cfg.output_dir = Some(format!("runs/example_lander/{regime}").into());
        let s = run(&cfg)?.score()?;
        println!("{regime:>8}: {:.2} ± {:.2}", s.mean, s.se);
    }
    Ok(())
}

fn lander_agent() -> AgentConfig {
    AgentConfig::Batch(BatchAgentConfig { timesteps_per_batch: Some(5000), ..BatchAgentConfig::default() })
}
