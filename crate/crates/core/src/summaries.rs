//! Posterior summarization, crude rates, and between-group disparity
//! estimation with interval-based significance flags.

use thiserror::Error;

use crate::models::{CountData, FitResult};
use crate::stats::{mean, quantile_sorted, variance};

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("quantile list is empty")]
    EmptyQuantiles,
    #[error("quantile {0} outside [0, 1]")]
    QuantileOutOfRange(f64),
    #[error("fits cover different regions ({a} vs {b})")]
    RegionMismatch { a: usize, b: usize },
    #[error("fits have different retained draw counts ({a} vs {b})")]
    DrawCountMismatch { a: usize, b: usize },
}

/// Crude rate `y / n` per region; `None` where a region has no trials.
pub fn crude_rates(data: &CountData) -> Vec<Option<f64>> {
    data.events()
        .iter()
        .zip(data.trials())
        .map(|(&y, &n)| if n == 0 { None } else { Some(y as f64 / n as f64) })
        .collect()
}

/// Per-region posterior summary of the incidence rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub region_id: String,
    pub mean: f64,
    pub sd: f64,
    /// One entry per requested quantile, in request order.
    pub quantiles: Vec<f64>,
}

/// Posterior mean, sd, and requested quantiles of each region's rate.
pub fn summarize(fit: &FitResult, quantiles: &[f64]) -> Result<Vec<SummaryRow>, SummaryError> {
    if quantiles.is_empty() {
        return Err(SummaryError::EmptyQuantiles);
    }
    for &q in quantiles {
        if !(0.0..=1.0).contains(&q) {
            return Err(SummaryError::QuantileOutOfRange(q));
        }
    }
    let mut rows = Vec::with_capacity(fit.n_regions());
    for (i, id) in fit.region_ids().iter().enumerate() {
        let draws = fit.pi_draws(i);
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(SummaryRow {
            region_id: id.clone(),
            mean: mean(&draws),
            sd: variance(&draws).sqrt(),
            quantiles: quantiles.iter().map(|&q| quantile_sorted(&sorted, q)).collect(),
        });
    }
    Ok(rows)
}

/// Per-region rate-ratio summary between two strata, with the
/// equal-tailed 95% interval and the interval-exclusion significance
/// flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityEstimate {
    pub region_id: String,
    pub ratio_mean: f64,
    pub ratio_median: f64,
    pub q2_5: f64,
    pub q97_5: f64,
    /// True exactly when the 95% interval excludes one.
    pub significant: bool,
}

/// Rate ratios `pi_comparison / pi_reference` per region, paired by draw
/// index across the two independent fits. Both fits must share region
/// ordering and retained draw counts.
pub fn disparity(
    comparison: &FitResult,
    reference: &FitResult,
) -> Result<Vec<DisparityEstimate>, SummaryError> {
    if comparison.region_ids() != reference.region_ids() {
        return Err(SummaryError::RegionMismatch {
            a: comparison.n_regions(),
            b: reference.n_regions(),
        });
    }
    if comparison.n_draws() != reference.n_draws() {
        return Err(SummaryError::DrawCountMismatch {
            a: comparison.n_draws(),
            b: reference.n_draws(),
        });
    }
    let mut out = Vec::with_capacity(comparison.n_regions());
    for (i, id) in comparison.region_ids().iter().enumerate() {
        let num = comparison.pi_draws(i);
        let den = reference.pi_draws(i);
        let ratios: Vec<f64> = num.iter().zip(&den).map(|(&a, &b)| a / b).collect();
        let mut sorted = ratios.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q2_5 = quantile_sorted(&sorted, 0.025);
        let q97_5 = quantile_sorted(&sorted, 0.975);
        out.push(DisparityEstimate {
            region_id: id.clone(),
            ratio_mean: mean(&ratios),
            ratio_median: quantile_sorted(&sorted, 0.5),
            q2_5,
            q97_5,
            significant: q2_5 > 1.0 || q97_5 < 1.0,
        });
    }
    Ok(out)
}
