//! Hierarchical beta-binomial model: the conjugate "true" model of the
//! comparison study. Rates get closed-form Gibbs draws; the
//! hyperparameters `(a, pi0)` get random-walk Metropolis on logit
//! transforms under their uniform priors `a ~ Unif(0, 100)`,
//! `pi0 ~ Unif(0, 1)`, with `b = a (1 - pi0) / pi0`. The posterior of
//! `a` is the model's informativeness measure.

use rand_distr::Distribution;

use crate::informativeness::{invlogit, logit, BetaParams};
use crate::mcmc::{run_chain, ChainConfig, McmcError, MwgModel, SweepCtx};
use crate::stats::ln_gamma;

use super::{CountData, FitError, FitResult, FittedModel};

const A_MAX: f64 = 100.0;
// keep rates strictly inside (0, 1) so log terms stay finite
const PI_EPS: f64 = 1e-12;

pub(crate) struct BbState {
    pi: Vec<f64>,
    a: f64,
    pi0: f64,
    sum_ln_pi: f64,
    sum_ln_1mpi: f64,
}

struct BetaBinomialModel<'a> {
    data: &'a CountData,
}

impl BetaBinomialModel<'_> {
    /// Log joint of `(a, pi0)` given the rates, up to a constant:
    /// the product of beta prior densities at the current rates.
    fn log_cond(&self, a: f64, pi0: f64, s1: f64, s0: f64) -> f64 {
        if !(a > 0.0 && a < A_MAX && pi0 > 0.0 && pi0 < 1.0) {
            return f64::NEG_INFINITY;
        }
        let b = a * (1.0 - pi0) / pi0;
        let i = self.data.len() as f64;
        i * (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)) + (a - 1.0) * s1 + (b - 1.0) * s0
    }
}

fn gibbs_rate(y: u64, n: u64, a: f64, b: f64, rng: &mut crate::mcmc::ChainRng) -> f64 {
    let dist = rand_distr::Beta::new(y as f64 + a, (n - y) as f64 + b)
        .expect("conjugate beta parameters are positive");
    dist.sample(rng).clamp(PI_EPS, 1.0 - PI_EPS)
}

impl MwgModel for BetaBinomialModel<'_> {
    type State = BbState;

    fn initial_state(&self) -> Result<BbState, McmcError> {
        let pi: Vec<f64> = (0..self.data.len())
            .map(|i| invlogit(self.data.empirical_logit(i)).clamp(PI_EPS, 1.0 - PI_EPS))
            .collect();
        let pi0 = invlogit(self.data.pooled_logit()).clamp(1e-3, 1.0 - 1e-3);
        let (s1, s0) = sums(&pi);
        Ok(BbState { pi, a: 5.0, pi0, sum_ln_pi: s1, sum_ln_1mpi: s0 })
    }

    fn column_names(&self) -> Vec<String> {
        let mut names = vec!["a".to_string(), "b".to_string(), "pi0".to_string()];
        names.extend(self.data.region_ids().iter().map(|id| format!("pi[{id}]")));
        names
    }

    fn record(&self, state: &BbState, out: &mut Vec<f64>) {
        out.push(state.a);
        out.push(state.a * (1.0 - state.pi0) / state.pi0);
        out.push(state.pi0);
        out.extend_from_slice(&state.pi);
    }

    fn scale_names(&self) -> Vec<String> {
        vec!["a".into(), "pi0".into()]
    }

    fn sweep(&self, state: &mut BbState, ctx: &mut SweepCtx<'_>) -> Result<(), McmcError> {
        let b = state.a * (1.0 - state.pi0) / state.pi0;
        for i in 0..state.pi.len() {
            state.pi[i] =
                gibbs_rate(self.data.events()[i], self.data.trials()[i], state.a, b, ctx.rng);
        }
        let (s1, s0) = sums(&state.pi);
        state.sum_ln_pi = s1;
        state.sum_ln_1mpi = s0;

        // a on logit(a / A_MAX); jacobian a (1 - a/A_MAX)
        let pi0 = state.pi0;
        let u = logit(state.a / A_MAX);
        let u = ctx.metropolis(0, u, |u| {
            let a = A_MAX * invlogit(u);
            self.log_cond(a, pi0, s1, s0) + a.ln() + (1.0 - a / A_MAX).ln()
        })?;
        state.a = A_MAX * invlogit(u);

        // pi0 on logit scale; jacobian pi0 (1 - pi0)
        let a = state.a;
        let v = ctx.metropolis(1, logit(state.pi0), |v| {
            let p = invlogit(v);
            self.log_cond(a, p, s1, s0) + p.ln() + (1.0 - p).ln()
        })?;
        state.pi0 = invlogit(v);
        Ok(())
    }

    fn in_support(&self, state: &BbState) -> bool {
        state.a > 0.0
            && state.a < A_MAX
            && state.pi0 > 0.0
            && state.pi0 < 1.0
            && state.pi.iter().all(|&p| p > 0.0 && p < 1.0)
    }
}

fn sums(pi: &[f64]) -> (f64, f64) {
    let s1 = pi.iter().map(|p| p.ln()).sum();
    let s0 = pi.iter().map(|p| (-p).ln_1p()).sum();
    (s1, s0)
}

/// Fit the hierarchical beta-binomial model.
pub fn fit_beta_binomial(data: &CountData, config: &ChainConfig) -> Result<FitResult, FitError> {
    if data.len() < 2 {
        return Err(FitError::TooFewRegions { need: 2, got: data.len() });
    }
    if data.total_trials() == 0 {
        return Err(FitError::NoInformation);
    }
    let model = BetaBinomialModel { data };
    let samples = run_chain(&model, config)?;
    FitResult::assemble(
        FittedModel::BetaBinomial,
        samples,
        data.region_ids().to_vec(),
        0,
        3,
    )
}

/// Reference fit with the beta prior pinned at `prior`: every sweep draws
/// each rate from its exact conjugate posterior, so retained draws are
/// independent samples from the closed-form marginal.
pub fn fit_beta_fixed(
    data: &CountData,
    prior: &BetaParams,
    config: &ChainConfig,
) -> Result<FitResult, FitError> {
    struct FixedModel<'a> {
        data: &'a CountData,
        a: f64,
        b: f64,
    }

    impl MwgModel for FixedModel<'_> {
        type State = Vec<f64>;

        fn initial_state(&self) -> Result<Vec<f64>, McmcError> {
            Ok(vec![self.a / (self.a + self.b); self.data.len()])
        }

        fn column_names(&self) -> Vec<String> {
            let mut names = vec!["a".to_string(), "b".to_string()];
            names.extend(self.data.region_ids().iter().map(|id| format!("pi[{id}]")));
            names
        }

        fn record(&self, state: &Vec<f64>, out: &mut Vec<f64>) {
            out.push(self.a);
            out.push(self.b);
            out.extend_from_slice(state);
        }

        fn scale_names(&self) -> Vec<String> {
            vec![]
        }

        fn sweep(&self, state: &mut Vec<f64>, ctx: &mut SweepCtx<'_>) -> Result<(), McmcError> {
            for i in 0..state.len() {
                state[i] = gibbs_rate(
                    self.data.events()[i],
                    self.data.trials()[i],
                    self.a,
                    self.b,
                    ctx.rng,
                );
            }
            Ok(())
        }
    }

    let model = FixedModel { data, a: prior.a(), b: prior.b() };
    let samples = run_chain(&model, config)?;
    FitResult::assemble(FittedModel::BetaFixed, samples, data.region_ids().to_vec(), 0, 2)
}
