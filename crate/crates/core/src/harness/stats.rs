//! Scores and intervals reported by the harness.

use serde::Serialize;

use crate::error::{config, Error, Result};
use crate::rng::RngStream;

/// Episodes per seed that enter the final score.
pub const FINAL_WINDOW: usize = 40;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); NaN below two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// `sample_std / sqrt(n)`.
pub fn standard_error(values: &[f64]) -> f64 {
    sample_std(values) / (values.len() as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data (R's type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Cross-seed summary of per-seed final scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Score {
    pub mean: f64,
    pub se: f64,
    pub per_seed: Vec<(u64, f64)>,
}

impl Score {
    pub fn values(&self) -> Vec<f64> {
        self.per_seed.iter().map(|(_, v)| *v).collect()
    }
}

/// Mean of the last [`FINAL_WINDOW`] completed episode returns of one seed.
pub fn seed_score(seed: u64, returns: &[f64]) -> Result<f64> {
    if returns.len() < FINAL_WINDOW {
        return Err(Error::InsufficientData(format!(
            "seed {seed} completed {} episodes, at least {FINAL_WINDOW} are needed",
            returns.len()
        )));
    }
    Ok(mean(&returns[returns.len() - FINAL_WINDOW..]))
}

/// Per-seed last-40-episode means, their cross-seed mean and standard error.
/// `per_seed` holds each seed's completed episode returns in completion order
/// (already discounted for discrete tasks).
pub fn final_score(per_seed: &[(u64, Vec<f64>)]) -> Result<Score> {
    if per_seed.is_empty() {
        return Err(Error::InsufficientData("no seeds to score".into()));
    }
    let scores = per_seed
        .iter()
        .map(|(seed, r)| Ok((*seed, seed_score(*seed, r)?)))
        .collect::<Result<Vec<(u64, f64)>>>()?;
    let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
    Ok(Score {
        mean: mean(&values),
        se: standard_error(&values),
        per_seed: scores,
    })
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, rng: &mut RngStream) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "bootstrap needs at least 2 values, got {}",
            values.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return config("bootstrap level must be in (0, 1) and resamples positive");
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.below(n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&means, alpha), quantile_sorted(&means, 1.0 - alpha)))
}
