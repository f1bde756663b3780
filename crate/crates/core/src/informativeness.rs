//! Closed-form machinery linking beta and logitnormal priors for binomial
//! rates, and the informativeness measures built on that link.
//!
//! A `Beta(a, b)` prior on an incidence rate contributes `a` prior events
//! and `b` prior non-events, so `a` is a natural yardstick for how much a
//! prior is adding to the data. The moment-matched logitnormal
//! counterpart (via the delta method) carries that yardstick over to
//! logit-scale models: `a_hat` for an independent logitnormal prior, and
//! a lower bound `a_hat` for the BYM/CAR model evaluated from its
//! conditional-variance bound. Evaluating the CAR bound at the reference
//! neighbor count `m0 = 3` gives the global measure used to compare and
//! constrain model strength across analyses.
//!
//! Everything here is a pure function of value types; all formulas run in
//! double precision through log-space guards so large `|mu|` does not
//! overflow `exp`.

use thiserror::Error;

/// Reference neighbor count for the global informativeness measure.
pub const GLOBAL_REFERENCE_NEIGHBORS: u32 = 3;

#[derive(Debug, Error, PartialEq)]
pub enum InformativenessError {
    #[error("beta parameter {name} must be finite and > 0, got {value}")]
    InvalidBetaParam { name: &'static str, value: f64 },
    #[error("logitnormal mu must be finite, got {value}")]
    InvalidMu { value: f64 },
    #[error("variance parameter {name} must be finite and > 0, got {value}")]
    InvalidVariance { name: &'static str, value: f64 },
    #[error("neighbor count must be >= 1")]
    InvalidNeighborCount,
    #[error("event count {y} exceeds trial count {n}")]
    EventsExceedTrials { y: u64, n: u64 },
    #[error("implied informativeness {a_hat} is not positive; no beta equivalent exists")]
    NonPositiveInformativeness { a_hat: f64 },
    #[error("informativeness bounds must satisfy 0 <= lo < hi, got ({lo}, {hi})")]
    InvalidBounds { lo: f64, hi: f64 },
}

/// `Beta(a, b)` prior: `a` prior events, `b` prior non-events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    a: f64,
    b: f64,
}

impl BetaParams {
    pub fn new(a: f64, b: f64) -> Result<Self, InformativenessError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(InformativenessError::InvalidBetaParam { name: "a", value: a });
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(InformativenessError::InvalidBetaParam { name: "b", value: b });
        }
        Ok(BetaParams { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Prior mean `a / (a + b)`.
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    /// Prior variance `ab / ((a+b)^2 (a+b+1))`.
    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }
}

/// Logitnormal prior: `logit(pi) ~ Norm(mu, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitNormalParams {
    mu: f64,
    sigma2: f64,
}

impl LogitNormalParams {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, InformativenessError> {
        if !mu.is_finite() {
            return Err(InformativenessError::InvalidMu { value: mu });
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(InformativenessError::InvalidVariance { name: "sigma2", value: sigma2 });
        }
        Ok(LogitNormalParams { mu, sigma2 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Hyperparameter state of the BYM/CAR model at one region: linear
/// predictor value, heterogeneity variance, CAR conditional variance, and
/// the region's neighbor count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarHyperState {
    pub xbeta: f64,
    pub sigma2: f64,
    pub tau2: f64,
    pub m: u32,
}

impl CarHyperState {
    pub fn new(xbeta: f64, sigma2: f64, tau2: f64, m: u32) -> Result<Self, InformativenessError> {
        if !xbeta.is_finite() {
            return Err(InformativenessError::InvalidMu { value: xbeta });
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(InformativenessError::InvalidVariance { name: "sigma2", value: sigma2 });
        }
        if !(tau2.is_finite() && tau2 > 0.0) {
            return Err(InformativenessError::InvalidVariance { name: "tau2", value: tau2 });
        }
        if m < 1 {
            return Err(InformativenessError::InvalidNeighborCount);
        }
        Ok(CarHyperState { xbeta, sigma2, tau2, m })
    }
}

/// Numerically stable `1 / (1 + e^{-x})`.
pub fn invlogit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(p / (1 - p))`.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Numerically stable `ln(1 + e^x)`.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Conjugate update: `Beta(y + a, n - y + b)`.
pub fn beta_posterior(
    y: u64,
    n: u64,
    prior: &BetaParams,
) -> Result<BetaParams, InformativenessError> {
    if y > n {
        return Err(InformativenessError::EventsExceedTrials { y, n });
    }
    BetaParams::new(y as f64 + prior.a, (n - y) as f64 + prior.b)
}

/// Delta-method mean and variance of a logitnormal random variable:
/// mean `e^mu / (1 + e^mu)`, variance `sigma2 e^{2mu} / (1 + e^mu)^4`
/// (squared first derivative of the inverse logit times the latent
/// variance).
pub fn delta_moments(p: &LogitNormalParams) -> (f64, f64) {
    let mean = invlogit(p.mu);
    let variance = p.sigma2 * (2.0 * p.mu - 4.0 * log1p_exp(p.mu)).exp();
    (mean, variance)
}

/// Moment-matched logitnormal parameters for a beta prior:
/// `mu = log(a/b)`, `sigma2 = (a+b)^2 / (ab(a+b+1))`.
pub fn beta_to_logitnormal(prior: &BetaParams) -> LogitNormalParams {
    let s = prior.a + prior.b;
    LogitNormalParams {
        mu: prior.a.ln() - prior.b.ln(),
        sigma2: s * s / (prior.a * prior.b * (s + 1.0)),
    }
}

/// Informativeness of a logitnormal prior in equivalent prior events:
/// `a_hat = (1 + e^mu) / sigma2 - e^mu / (1 + e^mu)`.
///
/// Composed with [`beta_to_logitnormal`] this returns `a` identically.
/// Very diffuse priors give negative values; they are reported raw, not
/// clamped, so the regime change stays visible (constraint logic imposes
/// positive lower bounds elsewhere).
pub fn logitnormal_informativeness(p: &LogitNormalParams) -> f64 {
    (log1p_exp(p.mu) - p.sigma2.ln()).exp() - invlogit(p.mu)
}

/// Beta prior equivalent to a logitnormal prior: `(a_hat, a_hat e^{-mu})`.
/// Errors when the implied informativeness is not positive.
pub fn logitnormal_to_beta(p: &LogitNormalParams) -> Result<BetaParams, InformativenessError> {
    let a_hat = logitnormal_informativeness(p);
    if a_hat <= 0.0 {
        return Err(InformativenessError::NonPositiveInformativeness { a_hat });
    }
    BetaParams::new(a_hat, (a_hat.ln() - p.mu).exp())
}

/// Lower bound on the informativeness of the BYM/CAR model at one region,
/// from the conditional-variance upper bound
/// `sigma2 + (sigma2 + tau2) / m`:
/// `a_hat = (1 + e^{xb}) / (sigma2 + (sigma2 + tau2)/m) - e^{xb} / (1 + e^{xb})`.
pub fn car_informativeness(h: &CarHyperState) -> f64 {
    car_informativeness_at(h, h.m)
}

/// Global model informativeness: the CAR bound evaluated at the reference
/// neighbor count `m0 = 3`, ignoring the state's own `m`.
pub fn global_informativeness(h: &CarHyperState) -> f64 {
    car_informativeness_at(h, GLOBAL_REFERENCE_NEIGHBORS)
}

/// The CAR bound at an explicit neighbor count.
pub fn car_informativeness_at(h: &CarHyperState, m: u32) -> f64 {
    let bound = h.sigma2 + (h.sigma2 + h.tau2) / f64::from(m);
    (log1p_exp(h.xbeta) - bound.ln()).exp() - invlogit(h.xbeta)
}

/// Solve the informativeness formula for `sigma2` at the two ends of a
/// target window `a_hat` in `(a_lo, a_hi)`:
/// `sigma2 = (1 + e^mu) / (a_hat + e^mu / (1 + e^mu))`.
///
/// Returns `(sigma2_lo, sigma2_hi)` where `sigma2_lo` corresponds to
/// `a_hi` and `sigma2_hi` to `a_lo` (informativeness decreases in
/// `sigma2`). Precision-scale bounds are the reciprocals. When
/// `a_lo + invlogit(mu)` underflows to zero the window is unbounded above
/// and `sigma2_hi` is the `+inf` sentinel.
pub fn informativeness_sigma2_bounds(
    mu: f64,
    a_lo: f64,
    a_hi: f64,
) -> Result<(f64, f64), InformativenessError> {
    if !(a_lo >= 0.0 && a_lo < a_hi) {
        return Err(InformativenessError::InvalidBounds { lo: a_lo, hi: a_hi });
    }
    let sigma2_at = |a_hat: f64| -> f64 {
        let denom = a_hat + invlogit(mu);
        if denom <= 0.0 {
            f64::INFINITY
        } else {
            (log1p_exp(mu) - denom.ln()).exp()
        }
    };
    Ok((sigma2_at(a_hi), sigma2_at(a_lo)))
}
