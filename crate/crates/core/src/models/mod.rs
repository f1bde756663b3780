//! The three fitted model specifications: hierarchical beta-binomial,
//! hierarchical logitnormal with an informativeness window, and the
//! BYM/CAR spatial model with an optional global-informativeness
//! constraint. One fit is one chain; strata are fit independently.

mod beta_binomial;
mod car;
mod logitnormal;

pub use beta_binomial::{fit_beta_binomial, fit_beta_fixed};
pub use car::fit_car;
pub use logitnormal::{fit_logitnormal, fit_logitnormal_fixed, DEFAULT_A_BOUNDS};

use thiserror::Error;

use crate::graph::RegionGraph;
use crate::informativeness::InformativenessError;
use crate::mcmc::diagnostics::Diagnostics;
use crate::mcmc::{McmcError, PosteriorSamples};
use crate::stats;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("count data invalid: {0}")]
    InvalidData(String),
    #[error("need at least {need} regions, got {got}")]
    TooFewRegions { need: usize, got: usize },
    #[error("no information in the data: every region has zero trials")]
    NoInformation,
    #[error("data regions do not match the graph: {0}")]
    GraphDataMismatch(String),
    #[error("model specification invalid: {0}")]
    InvalidSpec(String),
    #[error("informativeness bounds ({lo}, {hi}) invalid: need 0 <= lo < hi")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("constraint infeasible: {0}")]
    ConstraintInfeasible(String),
    #[error(transparent)]
    Mcmc(#[from] McmcError),
    #[error(transparent)]
    Informativeness(#[from] InformativenessError),
}

/// Per-region trials and events for one stratum.
#[derive(Debug, Clone, PartialEq)]
pub struct CountData {
    region_ids: Vec<String>,
    n: Vec<u64>,
    y: Vec<u64>,
    stratum: String,
}

impl CountData {
    pub fn new(
        region_ids: Vec<String>,
        n: Vec<u64>,
        y: Vec<u64>,
        stratum: impl Into<String>,
    ) -> Result<Self, FitError> {
        if region_ids.len() != n.len() || n.len() != y.len() {
            return Err(FitError::InvalidData(format!(
                "length mismatch: {} ids, {} trial counts, {} event counts",
                region_ids.len(),
                n.len(),
                y.len()
            )));
        }
        if region_ids.is_empty() {
            return Err(FitError::InvalidData("no regions".into()));
        }
        for i in 0..n.len() {
            if y[i] > n[i] {
                return Err(FitError::InvalidData(format!(
                    "region `{}`: events {} exceed trials {}",
                    region_ids[i], y[i], n[i]
                )));
            }
        }
        Ok(CountData { region_ids, n, y, stratum: stratum.into() })
    }

    pub fn len(&self) -> usize {
        self.region_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_ids.is_empty()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn trials(&self) -> &[u64] {
        &self.n
    }

    pub fn events(&self) -> &[u64] {
        &self.y
    }

    pub fn stratum(&self) -> &str {
        &self.stratum
    }

    pub fn total_trials(&self) -> u64 {
        self.n.iter().sum()
    }

    pub fn total_events(&self) -> u64 {
        self.y.iter().sum()
    }

    /// Empirical logit with a +0.5 / +1 continuity correction when the
    /// count sits on the boundary.
    pub(crate) fn empirical_logit(&self, i: usize) -> f64 {
        empirical_logit(self.y[i], self.n[i])
    }

    pub(crate) fn pooled_logit(&self) -> f64 {
        empirical_logit(self.total_events(), self.total_trials())
    }

    /// Regions must match the graph ids in graph order.
    pub(crate) fn check_alignment(&self, graph: &RegionGraph) -> Result<(), FitError> {
        if self.region_ids.as_slice() != graph.region_ids() {
            return Err(FitError::GraphDataMismatch(format!(
                "{} data regions vs {} graph regions (ids must match in graph order)",
                self.len(),
                graph.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn empirical_logit(y: u64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (y, n) = (y as f64, n as f64);
    if y == 0.0 || y == n {
        ((y + 0.5) / (n + 1.0 - y - 0.5)).ln()
    } else {
        (y / (n - y)).ln()
    }
}

/// Which model produced a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FittedModel {
    BetaBinomial,
    Logitnormal,
    LogitnormalFixed,
    BetaFixed,
    Car,
}

impl FittedModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FittedModel::BetaBinomial => "beta-binomial",
            FittedModel::Logitnormal => "logitnormal",
            FittedModel::LogitnormalFixed => "logitnormal-fixed",
            FittedModel::BetaFixed => "beta-fixed",
            FittedModel::Car => "car",
        }
    }
}

/// A completed fit: retained draws for hyperparameters, per-region rates,
/// the per-draw informativeness measure, and chain diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: FittedModel,
    pub samples: PosteriorSamples,
    pub diagnostics: Diagnostics,
    region_ids: Vec<String>,
    info_col: usize,
    pi_start: usize,
}

impl FitResult {
    pub(crate) fn assemble(
        model: FittedModel,
        samples: PosteriorSamples,
        region_ids: Vec<String>,
        info_col: usize,
        pi_start: usize,
    ) -> Result<Self, FitError> {
        let diagnostics = crate::mcmc::diagnostics::compute_diagnostics(&samples)?;
        Ok(FitResult { model, samples, diagnostics, region_ids, info_col, pi_start })
    }

    /// Rebuild a fit view from exported samples (e.g. a samples CSV read
    /// back from disk). Region ids come from the contiguous `pi[...]`
    /// column block; the informativeness column is whichever of `a`,
    /// `a_hat`, `a_hat0` is present.
    pub fn from_samples(model: FittedModel, samples: PosteriorSamples) -> Result<Self, FitError> {
        let names = samples.names();
        let info_col = names
            .iter()
            .position(|n| n == "a" || n == "a_hat" || n == "a_hat0")
            .ok_or_else(|| {
                FitError::InvalidData("samples carry no informativeness column".into())
            })?;
        let pi_start = names
            .iter()
            .position(|n| n.starts_with("pi["))
            .ok_or_else(|| FitError::InvalidData("samples carry no pi[...] columns".into()))?;
        let mut region_ids = Vec::new();
        for name in &names[pi_start..] {
            match name.strip_prefix("pi[").and_then(|s| s.strip_suffix(']')) {
                Some(id) => region_ids.push(id.to_string()),
                None => break,
            }
        }
        if names[pi_start + region_ids.len()..].iter().any(|n| n.starts_with("pi[")) {
            return Err(FitError::InvalidData("pi[...] columns are not contiguous".into()));
        }
        Self::assemble(model, samples, region_ids, info_col, pi_start)
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn n_draws(&self) -> usize {
        self.samples.n_draws()
    }

    /// Name of the informativeness column (`a`, `a_hat`, or `a_hat0`).
    pub fn informativeness_name(&self) -> &str {
        &self.samples.names()[self.info_col]
    }

    pub fn informativeness_draws(&self) -> Vec<f64> {
        self.samples.column(self.info_col)
    }

    pub fn pi_draws(&self, region: usize) -> Vec<f64> {
        assert!(region < self.region_ids.len());
        self.samples.column(self.pi_start + region)
    }

    pub fn pi_posterior_mean(&self, region: usize) -> f64 {
        stats::mean(&self.pi_draws(region))
    }

    /// Posterior mean of a named column.
    pub fn posterior_mean(&self, name: &str) -> Option<f64> {
        self.samples.column_by_name(name).map(|c| stats::mean(&c))
    }
}

/// Posterior distribution summary of the informativeness draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformativenessSummary {
    pub mean: f64,
    pub median: f64,
    pub q2_5: f64,
    pub q97_5: f64,
}

/// Summarize the per-draw informativeness measure of a fit.
pub fn posterior_informativeness(fit: &FitResult) -> InformativenessSummary {
    let draws = fit.informativeness_draws();
    let mut sorted = draws.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    InformativenessSummary {
        mean: stats::mean(&draws),
        median: stats::quantile_sorted(&sorted, 0.5),
        q2_5: stats::quantile_sorted(&sorted, 0.025),
        q97_5: stats::quantile_sorted(&sorted, 0.975),
    }
}

/// Inverse-gamma prior with density proportional to
/// `x^{-(shape+1)} exp(-scale / x)`, so the precision `1/x` is
/// gamma(shape, rate = scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl InvGammaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self, FitError> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(FitError::InvalidSpec(format!(
                "inverse-gamma parameters must be finite and positive, got ({shape}, {scale})"
            )));
        }
        Ok(InvGammaPrior { shape, scale })
    }
}

/// Window constraint on the global informativeness, enforced as
/// truncated joint support for `(beta0, sigma2, tau2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InformativenessConstraint {
    pub a0_min: f64,
    pub a0_max: f64,
    pub m0: u32,
}

impl InformativenessConstraint {
    pub fn new(a0_min: f64, a0_max: f64, m0: u32) -> Result<Self, FitError> {
        if !(a0_min >= 0.0 && a0_min < a0_max) {
            return Err(FitError::InvalidBounds { lo: a0_min, hi: a0_max });
        }
        if m0 < 1 {
            return Err(FitError::InvalidSpec("m0 must be >= 1".into()));
        }
        Ok(InformativenessConstraint { a0_min, a0_max, m0 })
    }

    /// Upper bound only, with the default reference neighbor count.
    pub fn max(a0_max: f64) -> Result<Self, FitError> {
        Self::new(0.0, a0_max, crate::informativeness::GLOBAL_REFERENCE_NEIGHBORS)
    }
}

/// BYM/CAR model specification: graph, variance priors, and the optional
/// informativeness constraint. The intercept prior is flat.
#[derive(Debug, Clone)]
pub struct CarModelSpec {
    pub graph: RegionGraph,
    pub sigma2_prior: InvGammaPrior,
    pub tau2_prior: InvGammaPrior,
    pub constraint: Option<InformativenessConstraint>,
}

impl CarModelSpec {
    /// Default priors: `sigma2 ~ IG(1, 1/100)`, `tau2 ~ IG(1, 1/7)`.
    pub fn new(graph: RegionGraph) -> Self {
        CarModelSpec {
            graph,
            sigma2_prior: InvGammaPrior { shape: 1.0, scale: 1.0 / 100.0 },
            tau2_prior: InvGammaPrior { shape: 1.0, scale: 1.0 / 7.0 },
            constraint: None,
        }
    }

    pub fn with_constraint(mut self, constraint: InformativenessConstraint) -> Self {
        self.constraint = Some(constraint);
        self
    }

    /// Reference neighbor count used when recording per-draw global
    /// informativeness, whether or not a constraint is active.
    pub fn m0(&self) -> u32 {
        self.constraint
            .map(|c| c.m0)
            .unwrap_or(crate::informativeness::GLOBAL_REFERENCE_NEIGHBORS)
    }
}
