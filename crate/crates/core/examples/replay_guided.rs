//! The replay-buffer agent with insertion-time mixing: each new transition is
//! stored with its partial observation with probability n_current / n_mix.
//!
//! cargo run --release --example replay_guided -- [timesteps]

use guided_rl::agents::ReplayAgentConfig;
use guided_rl::envs::EnvConfig;
use guided_rl::harness::{run, AgentConfig, Regime, RunConfig};

fn main() -> guided_rl::Result<()> {
    env_logger::init();
    let timesteps: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let agent = AgentConfig::Replay(ReplayAgentConfig {
        hidden_sizes: vec![64, 64],
        batch_size: 64,
        ..ReplayAgentConfig::default()
    });
    for regime in [Regime::Partial, Regime::Guided] {
        let mut cfg = RunConfig::new(EnvConfig::blind_lander(), agent.clone(), regime);
        cfg.total_timesteps = timesteps;
        cfg.seeds = vec![0];
        let result = run(&cfg)?;
        let seed = &result.seeds[0];
        let last = seed.metrics.last().expect("at least one iteration");
        println!(
            "{regime:>8}: {} episodes, last iteration return {:.2}, partial share {:.2}",
            seed.episodes.len(),
            last.avg_return,
            last.frac_partial
        );
    }
    Ok(())
}
