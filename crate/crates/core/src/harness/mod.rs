//! Multi-seed experiments: configuration, training runs, scoring, sweeps
//! over the mixing horizon, evaluation and plots.

mod config;
mod plot;
mod run;
mod stats;
mod sweep;

pub use config::{AgentConfig, Regime, RunConfig};
pub use plot::{curves_from_files, plot_metrics, render_svg, Curve};
pub use run::{
    build_trainer, checkpoint_path, episodes_path, evaluate, metrics_path, policy_from_checkpoint, read_metrics, run,
    run_seed, schedule_for, score_json, EpisodeRow, EvalResult, MetricsRow, RunResult, SeedRun, SeedStatus,
    EPISODES_HEADER, METRICS_HEADER,
};
pub use stats::{
    bootstrap_ci, final_score, mean, quantile_sorted, sample_std, seed_score, standard_error, Score, FINAL_WINDOW,
};
pub use sweep::{sweep_nmix, sweep_nmix_with, SweepEntry, SweepResult};
