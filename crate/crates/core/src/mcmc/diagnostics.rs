//! Single-chain convergence diagnostics: effective sample size via
//! Geyer's initial positive sequence, and the Geweke first-vs-last
//! window mean comparison.

use super::{McmcError, PosteriorSamples};

/// ESS estimate; `degenerate` marks a constant series, for which the
/// autocorrelation estimator is undefined and `ess = n` is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssEstimate {
    pub ess: f64,
    pub degenerate: bool,
}

/// Effective sample size from the initial positive sequence of
/// autocovariance pair sums. Always in `(0, n]`.
pub fn effective_sample_size(x: &[f64]) -> Result<EssEstimate, McmcError> {
    let n = x.len();
    if n < 10 {
        return Err(McmcError::TooFewDraws { n, need: 10 });
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let gamma = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (x[i] - mean) * (x[i + lag] - mean);
        }
        s / nf
    };
    let g0 = gamma(0);
    if g0 <= 0.0 || g0 < 1e-300 {
        return Ok(EssEstimate { ess: nf, degenerate: true });
    }

    // sum pair autocovariances while they stay positive (Geyer 1992),
    // enforcing monotone non-increase to tame truncation noise
    let mut acov_sum = 0.0;
    let mut prev_pair = f64::INFINITY;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = gamma(lag) + gamma(lag + 1);
        if pair <= 0.0 {
            break;
        }
        acov_sum += pair.min(prev_pair);
        prev_pair = pair;
        lag += 2;
    }

    let tau = 1.0 + 2.0 * acov_sum / g0;
    let ess = (nf / tau.max(1.0 / nf)).min(nf);
    Ok(EssEstimate { ess, degenerate: false })
}

/// Geweke z-score comparing the mean of the first `first_frac` of the
/// series against the last `last_frac`, with window-mean variances
/// estimated as `var / ess` within each window.
pub fn geweke(x: &[f64], first_frac: f64, last_frac: f64) -> Result<f64, McmcError> {
    if !(first_frac > 0.0 && first_frac < 1.0) {
        return Err(McmcError::BadFraction(first_frac));
    }
    if !(last_frac > 0.0 && last_frac < 1.0) {
        return Err(McmcError::BadFraction(last_frac));
    }
    let n = x.len();
    let n_a = (first_frac * n as f64).floor() as usize;
    let n_b = (last_frac * n as f64).floor() as usize;
    if n_a < 10 || n_b < 10 {
        return Err(McmcError::TooFewDraws { n: n_a.min(n_b), need: 10 });
    }
    if n_a + n_b > n {
        return Err(McmcError::WindowsOverlap { first_frac, last_frac, n });
    }
    let first = &x[..n_a];
    let last = &x[n - n_b..];
    let var_of_mean = |w: &[f64]| -> Result<f64, McmcError> {
        let m = w.len() as f64;
        let mean = w.iter().sum::<f64>() / m;
        let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m;
        let est = effective_sample_size(w)?;
        Ok(var / est.ess)
    };
    let mean_a = first.iter().sum::<f64>() / n_a as f64;
    let mean_b = last.iter().sum::<f64>() / n_b as f64;
    let denom = (var_of_mean(first)? + var_of_mean(last)?).sqrt();
    if denom == 0.0 {
        return Ok(if mean_a == mean_b { 0.0 } else { f64::INFINITY });
    }
    Ok((mean_a - mean_b) / denom)
}

pub fn geweke_default(x: &[f64]) -> Result<f64, McmcError> {
    geweke(x, 0.1, 0.5)
}

/// Per-parameter diagnostics for a finished chain.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// (name, ess) per column.
    pub ess: Vec<(String, f64)>,
    /// Columns flagged as constant series.
    pub degenerate: Vec<String>,
    /// (name, z) per column.
    pub geweke_z: Vec<(String, f64)>,
    /// (block name, post-burn-in acceptance rate).
    pub acceptance: Vec<(String, f64)>,
}

pub fn compute_diagnostics(samples: &PosteriorSamples) -> Result<Diagnostics, McmcError> {
    let mut ess = Vec::with_capacity(samples.n_columns());
    let mut geweke_z = Vec::with_capacity(samples.n_columns());
    let mut degenerate = Vec::new();
    for (j, name) in samples.names().iter().enumerate() {
        let col = samples.column(j);
        let est = effective_sample_size(&col)?;
        if est.degenerate {
            degenerate.push(name.clone());
        }
        ess.push((name.clone(), est.ess));
        let z = if est.degenerate { 0.0 } else { geweke_default(&col)? };
        geweke_z.push((name.clone(), z));
    }
    Ok(Diagnostics { ess, degenerate, geweke_z, acceptance: samples.acceptance.clone() })
}
