//! BYM/CAR spatial model with an optional global-informativeness
//! constraint.
//!
//! `logit(pi_i) = theta_i ~ Norm(beta0 + z_i, sigma2)` with intrinsic CAR
//! spatial effects `z_i | z_(-i) ~ Norm(sum_{j~i} z_j / m_i, tau2 / m_i)`,
//! a flat prior on `beta0`, and inverse-gamma priors on both variances.
//! The intrinsic CAR level is fixed by recentering `z` to sum to zero
//! every sweep, with the free intercept carrying the overall level.
//!
//! An active constraint truncates the joint support of
//! `(beta0, sigma2, tau2)` to the window where the global
//! informativeness (the CAR bound at the reference neighbor count `m0`)
//! stays inside `(a0_min, a0_max)`. Gibbs draws from the truncated full
//! conditionals use rejection with a capped retry count, then fall back
//! to a random-walk Metropolis step against the same truncated target, so
//! no retained draw can leave the window.

use rand_distr::Distribution;

use crate::informativeness::{car_informativeness_at, invlogit, log1p_exp, CarHyperState};
use crate::mcmc::{run_chain, ChainConfig, ChainRng, McmcError, MwgModel, SweepCtx};

use super::{CarModelSpec, CountData, FitError, FitResult, FittedModel};

const GIBBS_RETRIES: usize = 100;
const STALL_LIMIT: usize = 2000;
// fallback random-walk scale on the log-variance coordinates
const FALLBACK_LOG_SCALE: f64 = 0.3;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CarPin {
    pub sigma2: Option<f64>,
    pub tau2: Option<f64>,
    pub z_zero: bool,
}

pub(crate) struct CarState {
    theta: Vec<f64>,
    z: Vec<f64>,
    beta0: f64,
    sigma2: f64,
    tau2: f64,
    stalled_sweeps: usize,
}

struct CarModel<'a> {
    data: &'a CountData,
    spec: &'a CarModelSpec,
    edges: Vec<(usize, usize)>,
    ig_rank: f64,
    m0: u32,
    pin: CarPin,
}

impl CarModel<'_> {
    fn constraint_ok(&self, beta0: f64, sigma2: f64, tau2: f64) -> bool {
        match &self.spec.constraint {
            None => true,
            Some(c) => {
                let h = CarHyperState { xbeta: beta0, sigma2, tau2, m: 1 };
                let a0 = car_informativeness_at(&h, c.m0);
                a0 > c.a0_min && a0 < c.a0_max
            }
        }
    }

    fn a_hat0(&self, state: &CarState) -> f64 {
        let h = CarHyperState {
            xbeta: state.beta0,
            sigma2: state.sigma2,
            tau2: state.tau2,
            m: 1,
        };
        car_informativeness_at(&h, self.m0)
    }

    fn sum_sq_resid(&self, state: &CarState) -> f64 {
        state
            .theta
            .iter()
            .zip(&state.z)
            .map(|(&t, &z)| {
                let r = t - state.beta0 - z;
                r * r
            })
            .sum()
    }

    fn sum_sq_edge_diff(&self, z: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j)| {
                let d = z[i] - z[j];
                d * d
            })
            .sum()
    }

    /// Draw from a (possibly truncated) normal full conditional:
    /// rejection against the constraint with a retry cap, then one
    /// random-walk Metropolis step on the same truncated target.
    /// Returns `(value, moved)`.
    fn truncated_normal_draw<C>(
        &self,
        rng: &mut ChainRng,
        current: f64,
        mean: f64,
        var: f64,
        ok: C,
    ) -> (f64, bool)
    where
        C: Fn(f64) -> bool,
    {
        let sd = var.sqrt();
        if self.spec.constraint.is_none() {
            return (mean + sd * crate::mcmc::sample_std_normal(rng), true);
        }
        for _ in 0..GIBBS_RETRIES {
            let cand = mean + sd * crate::mcmc::sample_std_normal(rng);
            if ok(cand) {
                return (cand, true);
            }
        }
        let cand = current + sd * crate::mcmc::sample_std_normal(rng);
        if ok(cand) {
            let log_ratio = (sq(current - mean) - sq(cand - mean)) / (2.0 * var);
            if rng_accept(rng, log_ratio) {
                return (cand, true);
            }
        }
        (current, false)
    }

    /// Same mechanics for an inverse-gamma full conditional
    /// `IG(shape, rate)`; the fallback walks `ln x`.
    fn truncated_inv_gamma_draw<C>(
        &self,
        rng: &mut ChainRng,
        current: f64,
        shape: f64,
        rate: f64,
        ok: C,
    ) -> (f64, bool)
    where
        C: Fn(f64) -> bool,
    {
        let gamma = rand_distr::Gamma::new(shape, 1.0 / rate)
            .expect("positive shape and rate");
        if self.spec.constraint.is_none() {
            return (1.0 / gamma.sample(rng), true);
        }
        for _ in 0..GIBBS_RETRIES {
            let cand = 1.0 / gamma.sample(rng);
            if ok(cand) {
                return (cand, true);
            }
        }
        // log target of IG on u = ln x: -shape u - rate e^{-u}
        let u = current.ln();
        let cand_u = u + FALLBACK_LOG_SCALE * crate::mcmc::sample_std_normal(rng);
        let cand = cand_u.exp();
        if ok(cand) {
            let log_ratio =
                -shape * (cand_u - u) - rate * ((-cand_u).exp() - (-u).exp());
            if rng_accept(rng, log_ratio) {
                return (cand, true);
            }
        }
        (current, false)
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

fn rng_accept(rng: &mut ChainRng, log_ratio: f64) -> bool {
    use rand::Rng;
    log_ratio >= 0.0 || rng.gen::<f64>().ln() < log_ratio
}

impl MwgModel for CarModel<'_> {
    type State = CarState;

    fn initial_state(&self) -> Result<CarState, McmcError> {
        let theta: Vec<f64> =
            (0..self.data.len()).map(|i| self.data.empirical_logit(i)).collect();
        let beta0 = self.data.pooled_logit();
        let mut sigma2 = self.pin.sigma2.unwrap_or(0.1);
        let mut tau2 = self.pin.tau2.unwrap_or(0.1);
        if let Some(c) = &self.spec.constraint {
            if !self.constraint_ok(beta0, sigma2, tau2) {
                let target = if c.a0_max.is_finite() {
                    0.5 * (c.a0_min + c.a0_max)
                } else {
                    c.a0_min + 1.0
                };
                let a0_of = |t: f64| {
                    car_informativeness_at(
                        &CarHyperState { xbeta: beta0, sigma2: sigma2 * t, tau2: tau2 * t, m: 1 },
                        c.m0,
                    )
                };
                let (mut lo, mut hi) = (1e-12f64, 1e12f64);
                for _ in 0..200 {
                    let mid = (lo * hi).sqrt();
                    if a0_of(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = (lo * hi).sqrt();
                sigma2 *= t;
                tau2 *= t;
                if !self.constraint_ok(beta0, sigma2, tau2) {
                    return Err(McmcError::InitialStateRejected(format!(
                        "no variance scaling reaches the a0 window ({}, {}) at beta0 = {beta0}",
                        c.a0_min, c.a0_max
                    )));
                }
            }
        }
        Ok(CarState {
            theta,
            z: vec![0.0; self.data.len()],
            beta0,
            sigma2,
            tau2,
            stalled_sweeps: 0,
        })
    }

    fn column_names(&self) -> Vec<String> {
        let mut names = vec![
            "beta0".to_string(),
            "sigma2".to_string(),
            "tau2".to_string(),
            "a_hat0".to_string(),
        ];
        names.extend(self.data.region_ids().iter().map(|id| format!("z[{id}]")));
        names.extend(self.data.region_ids().iter().map(|id| format!("pi[{id}]")));
        names
    }

    fn record(&self, state: &CarState, out: &mut Vec<f64>) {
        out.push(state.beta0);
        out.push(state.sigma2);
        out.push(state.tau2);
        out.push(self.a_hat0(state));
        out.extend_from_slice(&state.z);
        out.extend(state.theta.iter().map(|&t| invlogit(t)));
    }

    fn scale_names(&self) -> Vec<String> {
        self.data.region_ids().iter().map(|id| format!("theta[{id}]")).collect()
    }

    fn sweep(&self, state: &mut CarState, ctx: &mut SweepCtx<'_>) -> Result<(), McmcError> {
        let count = state.theta.len();
        let inv_2s2 = 0.5 / state.sigma2;
        for i in 0..count {
            let (y, n) = (self.data.events()[i] as f64, self.data.trials()[i] as f64);
            let center = state.beta0 + state.z[i];
            state.theta[i] = ctx.metropolis(i, state.theta[i], |t| {
                y * t - n * log1p_exp(t) - inv_2s2 * sq(t - center)
            })?;
        }

        if !self.pin.z_zero {
            let graph = &self.spec.graph;
            for i in 0..count {
                let nb_sum: f64 = graph.neighbors(i).iter().map(|&j| state.z[j]).sum();
                let m = graph.neighbors(i).len() as f64;
                let prec = m / state.tau2 + 1.0 / state.sigma2;
                let mean =
                    (nb_sum / state.tau2 + (state.theta[i] - state.beta0) / state.sigma2) / prec;
                state.z[i] = mean + crate::mcmc::sample_std_normal(ctx.rng) / prec.sqrt();
            }
            let zbar = state.z.iter().sum::<f64>() / count as f64;
            for z in &mut state.z {
                *z -= zbar;
            }
        }

        let mut moved = false;

        // beta0: flat prior, normal full conditional around mean(theta - z)
        let resid_mean = state
            .theta
            .iter()
            .zip(&state.z)
            .map(|(&t, &z)| t - z)
            .sum::<f64>()
            / count as f64;
        let (sigma2, tau2) = (state.sigma2, state.tau2);
        let (beta0, m) = self.truncated_normal_draw(
            ctx.rng,
            state.beta0,
            resid_mean,
            state.sigma2 / count as f64,
            |b| self.constraint_ok(b, sigma2, tau2),
        );
        state.beta0 = beta0;
        moved |= m;

        if self.pin.sigma2.is_none() {
            let shape = self.spec.sigma2_prior.shape + 0.5 * count as f64;
            let rate = self.spec.sigma2_prior.scale + 0.5 * self.sum_sq_resid(state);
            let (beta0, tau2) = (state.beta0, state.tau2);
            let (sigma2, m) =
                self.truncated_inv_gamma_draw(ctx.rng, state.sigma2, shape, rate, |s2| {
                    self.constraint_ok(beta0, s2, tau2)
                });
            state.sigma2 = sigma2;
            moved |= m;
        }

        if self.pin.tau2.is_none() {
            let shape = self.spec.tau2_prior.shape + 0.5 * self.ig_rank;
            let rate = self.spec.tau2_prior.scale + 0.5 * self.sum_sq_edge_diff(&state.z);
            let (beta0, sigma2) = (state.beta0, state.sigma2);
            let (tau2, m) =
                self.truncated_inv_gamma_draw(ctx.rng, state.tau2, shape, rate, |t2| {
                    self.constraint_ok(beta0, sigma2, t2)
                });
            state.tau2 = tau2;
            moved |= m;
        }

        if self.spec.constraint.is_some() {
            state.stalled_sweeps = if moved { 0 } else { state.stalled_sweeps + 1 };
            if state.stalled_sweeps >= STALL_LIMIT {
                return Err(McmcError::ConstraintStalled { window: STALL_LIMIT });
            }
        }
        Ok(())
    }

    fn in_support(&self, state: &CarState) -> bool {
        state.sigma2 > 0.0
            && state.tau2 > 0.0
            && self.constraint_ok(state.beta0, state.sigma2, state.tau2)
    }
}

fn validate_spec(spec: &CarModelSpec) -> Result<(), FitError> {
    for (name, p) in [("sigma2", spec.sigma2_prior), ("tau2", spec.tau2_prior)] {
        if !(p.shape.is_finite() && p.shape > 0.0 && p.scale.is_finite() && p.scale > 0.0) {
            return Err(FitError::InvalidSpec(format!(
                "{name} inverse-gamma prior has invalid parameters ({}, {})",
                p.shape, p.scale
            )));
        }
    }
    if let Some(c) = &spec.constraint {
        if !(c.a0_min >= 0.0 && c.a0_min < c.a0_max) {
            return Err(FitError::InvalidBounds { lo: c.a0_min, hi: c.a0_max });
        }
        if c.m0 < 1 {
            return Err(FitError::InvalidSpec("m0 must be >= 1".into()));
        }
    }
    Ok(())
}

/// Fit the BYM/CAR model. Data regions must match the graph ids in graph
/// order; the per-draw global informativeness is recorded at the spec's
/// reference neighbor count whether or not a constraint is active.
pub fn fit_car(
    data: &CountData,
    spec: &CarModelSpec,
    config: &ChainConfig,
) -> Result<FitResult, FitError> {
    fit_car_pinned(data, spec, config, CarPin::default())
}

pub(crate) fn fit_car_pinned(
    data: &CountData,
    spec: &CarModelSpec,
    config: &ChainConfig,
    pin: CarPin,
) -> Result<FitResult, FitError> {
    validate_spec(spec)?;
    data.check_alignment(&spec.graph)?;
    if data.total_trials() == 0 {
        return Err(FitError::NoInformation);
    }
    let graph = &spec.graph;
    let mut edges = Vec::with_capacity(graph.edge_count());
    for i in 0..graph.len() {
        for &j in graph.neighbors(i) {
            if i < j {
                edges.push((i, j));
            }
        }
    }
    let components = graph.component_count();
    let model = CarModel {
        data,
        spec,
        edges,
        ig_rank: (graph.len() - components) as f64,
        m0: spec.m0(),
        pin,
    };
    let samples = match run_chain(&model, config) {
        Ok(s) => s,
        Err(McmcError::InitialStateRejected(msg)) => {
            return Err(FitError::ConstraintInfeasible(msg))
        }
        Err(e) => return Err(e.into()),
    };
    let n = data.len();
    FitResult::assemble(FittedModel::Car, samples, data.region_ids().to_vec(), 3, 4 + n)
}
