//! Trains briefly, saves a checkpoint, reloads it and evaluates the policy
//! on the partial channel only.

use guided_rl::envs::EnvConfig;
use guided_rl::harness::{evaluate, policy_from_checkpoint, run, AgentConfig, Regime, RunConfig};
use guided_rl::nn::Checkpoint;

fn main() -> guided_rl::Result<()> {
    let mut cfg = RunConfig::new(EnvConfig::rocksample(4, 4), AgentConfig::default(), Regime::Guided);
    cfg.total_timesteps = 30_000;
    cfg.seeds = vec![0];
    let result = run(&cfg)?;
    let ck = result.seeds[0].checkpoint.clone().expect("checkpoint");

    let path = std::env::temp_dir().join("guided_rl_example.ckpt");
    ck.save(&path)?;
    let loaded = Checkpoint::load(&path)?;
    assert_eq!(loaded, ck);

    let (policy, env, horizon) = policy_from_checkpoint(&loaded)?;
    let r = evaluate(&policy, &env, horizon, 200, 1)?;
    let mean = r.disc_returns.iter().sum::<f64>() / r.disc_returns.len() as f64;
    println!("{} policy, horizon {horizon}: mean discounted return {mean:.3} over 200 episodes", policy.kind());
    Ok(())
}
