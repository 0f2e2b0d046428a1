//! Sweeps the fraction of the run spent mixing full into partial samples and
//! writes sweep.csv and an SVG of the learning curves.
//!
//! cargo run --release --example mixing_sweep -- [timesteps] [seeds]

use std::path::PathBuf;

use guided_rl::agents::BatchAgentConfig;
use guided_rl::envs::EnvConfig;
use guided_rl::harness::{metrics_path, plot_metrics, sweep_nmix, AgentConfig, Regime, RunConfig};

fn main() -> guided_rl::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let timesteps: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(40_000);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);
    let out = PathBuf::from("runs/example_sweep");

    let mut cfg = RunConfig::new(EnvConfig::blind_lander(), lander_agent(), Regime::Guided);
    cfg.total_timesteps = timesteps;
    cfg.seeds = (0..seeds).collect();
    cfg.output_dir = Some(out.clone());
    let fractions = [0.25, 0.5, 0.75];
    let sweep = sweep_nmix(&cfg, &fractions)?;
    for (label, mean) in sweep.ordering() {
        println!("{label:>14}: {mean:.2}");
    }
    println!("every guided run >= partial: {}", sweep.guided_at_least_baseline());

    let mut files = Vec::new();
    for dir in std::iter::once("partial".to_owned()).chain(fractions.iter().map(|f| format!("guided_f{f}"))) {
        files.extend(cfg.seeds.iter().map(|&s| metrics_path(&out.join(&dir), s)));
    }
    plot_metrics(&files, "avg_return", &out.join("curves.svg"))?;
    println!("wrote {}", out.join("curves.svg").display());
    Ok(())
}

fn lander_agent() -> AgentConfig {
    AgentConfig::Batch(BatchAgentConfig { timesteps_per_batch: Some(5000), ..BatchAgentConfig::default() })
}
