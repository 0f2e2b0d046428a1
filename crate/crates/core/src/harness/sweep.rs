use std::fmt::Write as _;

use serde_json::json;

use crate::error::{config, Error, Result};
use crate::guidance::GuidanceConfig;
use crate::harness::config::{Regime, RunConfig};
use crate::harness::run::{run, score_json, RunResult};
use crate::harness::stats::Score;

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub label: String,
    /// `None` for the unguided baseline.
    pub fraction: Option<f64>,
    pub score: Option<Score>,
    pub error: Option<String>,
    /// A zero fraction never shows a full sample, so it reproduces the
    /// baseline exactly; such entries reuse the baseline run.
    pub duplicate_of_baseline: bool,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub baseline: SweepEntry,
    pub guided: Vec<SweepEntry>,
}

impl SweepResult {
    /// Labels ordered by mean score, best first.
    pub fn ordering(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = std::iter::once(&self.baseline)
            .chain(&self.guided)
            .filter_map(|e| e.score.as_ref().map(|s| (e.label.clone(), s.mean)))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }

    /// Whether every guided mean is at least the baseline mean.
    pub fn guided_at_least_baseline(&self) -> bool {
        let Some(base) = &self.baseline.score else {
            return false;
        };
        self.guided
            .iter()
            .all(|g| g.score.as_ref().is_some_and(|s| s.mean >= base.mean))
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("label,nmix_fraction,seed,score\n");
        for e in std::iter::once(&self.baseline).chain(&self.guided) {
            let frac = e.fraction.map(|f| f.to_string()).unwrap_or_default();
            for (seed, v) in e.score.iter().flat_map(|s| &s.per_seed) {
                let _ = writeln!(out, "{},{frac},{seed},{v}", e.label);
            }
        }
        out
    }
}

fn entry(label: String, fraction: Option<f64>, result: &RunResult) -> SweepEntry {
    let score = result.score();
    SweepEntry {
        label,
        fraction,
        error: score.as_ref().err().map(|e| e.to_string()),
        score: score.ok(),
        duplicate_of_baseline: false,
    }
}

/// Runs the unguided baseline and one guided run per N_MIX fraction.
pub fn sweep_nmix(base: &RunConfig, fractions: &[f64]) -> Result<SweepResult> {
    sweep_nmix_with(base, fractions, &mut |c| run(c))
}

/// [`sweep_nmix`] with a custom runner, e.g. one that reuses cached runs.
pub fn sweep_nmix_with(
    base: &RunConfig,
    fractions: &[f64],
    runner: &mut dyn FnMut(&RunConfig) -> Result<RunResult>,
) -> Result<SweepResult> {
    if let Some(bad) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return config(format!("sweep fractions must lie in [0, 1], got {bad}"));
    }
    let sub = |name: &str| base.output_dir.as_ref().map(|d| d.join(name));
    let mut baseline_cfg = base.clone();
    baseline_cfg.regime = Regime::Partial;
    baseline_cfg.output_dir = sub("partial");
    let baseline_run = runner(&baseline_cfg)?;
    let baseline = entry("partial".into(), None, &baseline_run);

    let mut guided = Vec::new();
    for &f in fractions {
        let label = format!("guided({f})");
        if f == 0.0 {
            log::info!("fraction 0 is the unguided baseline; reusing it");
            guided.push(SweepEntry {
                label,
                fraction: Some(f),
                duplicate_of_baseline: true,
                ..baseline.clone()
            });
            continue;
        }
        let mut cfg = base.clone();
        cfg.regime = Regime::Guided;
        cfg.guidance = Some(GuidanceConfig {
            nmix_fraction: f,
            ..base.guidance.clone().unwrap_or_default()
        });
        cfg.output_dir = sub(&format!("guided_f{f}"));
        let r = runner(&cfg)?;
        guided.push(entry(label, Some(f), &r));
    }
    let result = SweepResult { baseline, guided };

    if let Some(dir) = &base.output_dir {
        let w = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        w("sweep.csv", result.csv())?;
        let block = |e: &SweepEntry| {
            let mut v = match &e.score {
                Some(s) => score_json(&Ok(s.clone())),
                None => json!({ "error": e.error }),
            };
            v["nmix_fraction"] = json!(e.fraction);
            v["duplicate_of_baseline"] = json!(e.duplicate_of_baseline);
            v
        };
        let mut regimes = serde_json::Map::new();
        regimes.insert(result.baseline.label.clone(), block(&result.baseline));
        for g in &result.guided {
            regimes.insert(g.label.clone(), block(g));
        }
        let summary = json!({
            "regimes": regimes,
            "ordering": result.ordering().iter().map(|(l, m)| json!([l, m])).collect::<Vec<_>>(),
            "all_guided_at_least_unguided": result.guided_at_least_baseline(),
        });
        w("sweep_summary.json", serde_json::to_string_pretty(&summary).expect("json"))?;
    }
    Ok(result)
}
