//! Hierarchical logitnormal model with an informativeness window.
//!
//! `logit(pi_i) = theta_i ~ Norm(mu, 1/gamma)` with `mu ~ Unif(-10, 10)`
//! and `gamma | mu ~ Unif(gamma_L(mu), gamma_U(mu))`, where the precision
//! window is the image of the target informativeness window under the
//! closed-form inversion. The joint support therefore keeps
//! `a_hat(mu, 1/gamma)` strictly inside the requested bounds, and the
//! conditional-uniform normalization `1 / (gamma_U - gamma_L)` enters the
//! `mu` update. Each latent `theta_i` gets its own adaptive
//! random-walk block against the binomial-times-normal target.

use crate::informativeness::{
    informativeness_sigma2_bounds, invlogit, log1p_exp, logitnormal_informativeness,
    LogitNormalParams,
};
use crate::mcmc::{run_chain, ChainConfig, McmcError, MwgModel, SweepCtx};

use super::{CountData, FitError, FitResult, FittedModel};

/// Default informativeness window, mirroring the uniform prior ceiling of
/// the beta-binomial specification.
pub const DEFAULT_A_BOUNDS: (f64, f64) = (0.0, 100.0);

const MU_RANGE: (f64, f64) = (-10.0, 10.0);

pub(crate) struct LnState {
    theta: Vec<f64>,
    sum_theta: f64,
    sum_theta2: f64,
    mu: f64,
    gamma: f64,
}

impl LnState {
    fn sum_sq_dev(&self, mu: f64) -> f64 {
        let i = self.theta.len() as f64;
        self.sum_theta2 - 2.0 * mu * self.sum_theta + i * mu * mu
    }
}

struct LogitnormalModel<'a> {
    data: &'a CountData,
    a_lo: f64,
    a_hi: f64,
}

impl LogitnormalModel<'_> {
    /// Precision window implied by the informativeness window at `mu`.
    fn gamma_window(&self, mu: f64) -> (f64, f64) {
        let (s2_lo, s2_hi) = informativeness_sigma2_bounds(mu, self.a_lo, self.a_hi)
            .expect("bounds validated at fit entry");
        let gamma_lo = if s2_hi.is_infinite() { 0.0 } else { 1.0 / s2_hi };
        (gamma_lo, 1.0 / s2_lo)
    }

    fn a_hat(&self, mu: f64, gamma: f64) -> f64 {
        logitnormal_informativeness(
            &LogitNormalParams::new(mu, 1.0 / gamma).expect("gamma > 0 inside support"),
        )
    }
}

impl MwgModel for LogitnormalModel<'_> {
    type State = LnState;

    fn initial_state(&self) -> Result<LnState, McmcError> {
        let theta: Vec<f64> =
            (0..self.data.len()).map(|i| self.data.empirical_logit(i)).collect();
        let sum_theta = theta.iter().sum();
        let sum_theta2 = theta.iter().map(|t| t * t).sum();
        let mu = self.data.pooled_logit().clamp(MU_RANGE.0 + 0.1, MU_RANGE.1 - 0.1);
        // start a tenth of the way into the window
        let a_init = self.a_lo + 0.1 * (self.a_hi - self.a_lo);
        let denom = a_init + invlogit(mu);
        let sigma2 = (log1p_exp(mu) - denom.ln()).exp();
        Ok(LnState { theta, sum_theta, sum_theta2, mu, gamma: 1.0 / sigma2 })
    }

    fn column_names(&self) -> Vec<String> {
        let mut names = vec![
            "mu".to_string(),
            "gamma".to_string(),
            "sigma2".to_string(),
            "pi0".to_string(),
            "a_hat".to_string(),
        ];
        names.extend(self.data.region_ids().iter().map(|id| format!("pi[{id}]")));
        names
    }

    fn record(&self, state: &LnState, out: &mut Vec<f64>) {
        out.push(state.mu);
        out.push(state.gamma);
        out.push(1.0 / state.gamma);
        out.push(invlogit(state.mu));
        out.push(self.a_hat(state.mu, state.gamma));
        out.extend(state.theta.iter().map(|&t| invlogit(t)));
    }

    fn scale_names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            self.data.region_ids().iter().map(|id| format!("theta[{id}]")).collect();
        names.push("mu".into());
        names.push("gamma".into());
        names
    }

    fn sweep(&self, state: &mut LnState, ctx: &mut SweepCtx<'_>) -> Result<(), McmcError> {
        let i_count = state.theta.len();
        for i in 0..i_count {
            let (y, n) = (self.data.events()[i] as f64, self.data.trials()[i] as f64);
            let (mu, gamma) = (state.mu, state.gamma);
            let old = state.theta[i];
            let new = ctx.metropolis(i, old, |t| {
                y * t - n * log1p_exp(t) - 0.5 * gamma * (t - mu) * (t - mu)
            })?;
            if new != old {
                state.sum_theta += new - old;
                state.sum_theta2 += new * new - old * old;
                state.theta[i] = new;
            }
        }

        // mu: normal kernel around the latents plus the conditional-prior
        // normalization of gamma's window
        let gamma = state.gamma;
        let mu = ctx.metropolis(i_count, state.mu, |m| {
            if m <= MU_RANGE.0 || m >= MU_RANGE.1 {
                return f64::NEG_INFINITY;
            }
            let (g_lo, g_hi) = self.gamma_window(m);
            if gamma <= g_lo || gamma >= g_hi {
                return f64::NEG_INFINITY;
            }
            -0.5 * gamma * state.sum_sq_dev(m) - (g_hi - g_lo).ln()
        })?;
        state.mu = mu;

        // gamma on the log scale; its conditional prior is flat inside
        // the window so only the indicator enters
        let ss = state.sum_sq_dev(state.mu);
        let (g_lo, g_hi) = self.gamma_window(state.mu);
        let half_i = 0.5 * i_count as f64;
        let w = ctx.metropolis(i_count + 1, state.gamma.ln(), |w| {
            let g = w.exp();
            if g <= g_lo || g >= g_hi {
                return f64::NEG_INFINITY;
            }
            (half_i + 1.0) * w - 0.5 * g * ss
        })?;
        state.gamma = w.exp();
        Ok(())
    }

    fn in_support(&self, state: &LnState) -> bool {
        if !(state.mu > MU_RANGE.0 && state.mu < MU_RANGE.1 && state.gamma > 0.0) {
            return false;
        }
        let a_hat = self.a_hat(state.mu, state.gamma);
        a_hat > self.a_lo && a_hat < self.a_hi
    }
}

/// Fit the hierarchical logitnormal model with informativeness
/// restricted to `a_bounds` (use [`DEFAULT_A_BOUNDS`] to mirror the
/// beta-binomial prior ceiling).
pub fn fit_logitnormal(
    data: &CountData,
    config: &ChainConfig,
    a_bounds: (f64, f64),
) -> Result<FitResult, FitError> {
    let (a_lo, a_hi) = a_bounds;
    if !(a_lo >= 0.0 && a_lo < a_hi && a_hi.is_finite()) {
        return Err(FitError::InvalidBounds { lo: a_lo, hi: a_hi });
    }
    if data.total_trials() == 0 {
        return Err(FitError::NoInformation);
    }
    let model = LogitnormalModel { data, a_lo, a_hi };
    let samples = run_chain(&model, config)?;
    FitResult::assemble(FittedModel::Logitnormal, samples, data.region_ids().to_vec(), 4, 5)
}

/// Reference fit with the logitnormal prior pinned at `params`: only the
/// latent logits move, each against its binomial-times-normal target.
pub fn fit_logitnormal_fixed(
    data: &CountData,
    params: &LogitNormalParams,
    config: &ChainConfig,
) -> Result<FitResult, FitError> {
    struct FixedModel<'a> {
        data: &'a CountData,
        mu: f64,
        gamma: f64,
    }

    impl MwgModel for FixedModel<'_> {
        type State = Vec<f64>;

        fn initial_state(&self) -> Result<Vec<f64>, McmcError> {
            Ok((0..self.data.len()).map(|i| self.data.empirical_logit(i)).collect())
        }

        fn column_names(&self) -> Vec<String> {
            let mut names = vec!["mu".to_string(), "sigma2".to_string(), "a_hat".to_string()];
            names.extend(self.data.region_ids().iter().map(|id| format!("pi[{id}]")));
            names
        }

        fn record(&self, state: &Vec<f64>, out: &mut Vec<f64>) {
            out.push(self.mu);
            out.push(1.0 / self.gamma);
            out.push(logitnormal_informativeness(
                &LogitNormalParams::new(self.mu, 1.0 / self.gamma).unwrap(),
            ));
            out.extend(state.iter().map(|&t| invlogit(t)));
        }

        fn scale_names(&self) -> Vec<String> {
            self.data.region_ids().iter().map(|id| format!("theta[{id}]")).collect()
        }

        fn sweep(&self, state: &mut Vec<f64>, ctx: &mut SweepCtx<'_>) -> Result<(), McmcError> {
            for i in 0..state.len() {
                let (y, n) = (self.data.events()[i] as f64, self.data.trials()[i] as f64);
                let (mu, gamma) = (self.mu, self.gamma);
                state[i] = ctx.metropolis(i, state[i], |t| {
                    y * t - n * log1p_exp(t) - 0.5 * gamma * (t - mu) * (t - mu)
                })?;
            }
            Ok(())
        }
    }

    let model = FixedModel { data, mu: params.mu(), gamma: 1.0 / params.sigma2() };
    let samples = run_chain(&model, config)?;
    FitResult::assemble(
        FittedModel::LogitnormalFixed,
        samples,
        data.region_ids().to_vec(),
        2,
        3,
    )
}
