//! Seed-reproducible Metropolis-within-Gibbs machinery.
//!
//! A model implements [`MwgModel`]: it supplies an initial state, a
//! per-sweep update (any mix of Gibbs draws and Metropolis steps through
//! [`SweepCtx::metropolis`]), and a support predicate. The engine owns
//! the iteration schedule, the RNG, and one adaptive random-walk proposal
//! scale per declared block. Scales adapt toward 44% acceptance by
//! Robbins-Monro during the adaptation window and are frozen afterwards,
//! so the retained portion of the chain uses fixed kernels.
//!
//! Identical `(model, seed)` pairs produce bit-identical output.

pub mod diagnostics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt::fmt_sig12;

pub type ChainRng = ChaCha8Rng;

/// Scalar random-walk target acceptance rate.
pub const TARGET_ACCEPTANCE: f64 = 0.44;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error("chain config invalid: {0}")]
    InvalidConfig(String),
    #[error("model rejected its own initial state: {0}")]
    InitialStateRejected(String),
    #[error("non-finite log-density at iteration {iteration}")]
    NonFiniteLogDensity { iteration: usize },
    #[error("non-finite value recorded for `{column}` at iteration {iteration}")]
    NonFiniteValue { iteration: usize, column: String },
    #[error("retained draw violates the model support predicate at iteration {iteration}")]
    SupportViolation { iteration: usize },
    #[error("constrained updates made no progress over {window} consecutive sweeps")]
    ConstraintStalled { window: usize },
    #[error("series too short: {n} draws, need at least {need}")]
    TooFewDraws { n: usize, need: usize },
    #[error("diagnostic windows overlap: first {first_frac} + last {last_frac} of {n} draws")]
    WindowsOverlap { first_frac: f64, last_frac: f64, n: usize },
    #[error("window fraction {0} outside (0, 1)")]
    BadFraction(f64),
}

/// Iteration schedule and seed for one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Sweeps of proposal adaptation; clamped to the burn-in.
    pub adapt_window: usize,
}

impl ChainConfig {
    /// The default schedule: 20,000 iterations, 5,000 burn-in, thin by 3,
    /// adapting through the whole burn-in.
    pub fn new(seed: u64) -> Self {
        ChainConfig { iterations: 20_000, burn_in: 5_000, thin: 3, seed, adapt_window: 5_000 }
    }

    pub fn with_schedule(mut self, iterations: usize, burn_in: usize, thin: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self.thin = thin;
        self.adapt_window = self.adapt_window.min(burn_in);
        self
    }

    /// Retained draw count: floor division of the post-burn-in stretch.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<(), McmcError> {
        if self.burn_in >= self.iterations {
            return Err(McmcError::InvalidConfig(format!(
                "burn_in {} must be < iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(McmcError::InvalidConfig("thin must be >= 1".into()));
        }
        if self.retained() == 0 {
            return Err(McmcError::InvalidConfig(
                "schedule retains zero draws".into(),
            ));
        }
        Ok(())
    }
}

/// Retained draws: one row per draw, one column per recorded quantity
/// (parameters first, derived quantities wherever the model puts them).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    names: Vec<String>,
    values: Vec<f64>,
    n_rows: usize,
    pub config: ChainConfig,
    /// Post-burn-in acceptance rate per Metropolis block.
    pub acceptance: Vec<(String, f64)>,
}

impl PosteriorSamples {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_draws(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.names.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn iter_column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let w = self.names.len();
        self.values[j..].iter().step_by(w).copied()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_column(j).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|j| self.column(j))
    }

    /// CSV export: header row of column names, one row per retained draw,
    /// 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.names)?;
        for i in 0..self.n_rows {
            wtr.write_record(self.row(i).iter().map(|&v| fmt_sig12(v)))?;
        }
        wtr.flush()
    }

    /// Read a samples CSV produced by [`write_csv`]. The config echo is
    /// not stored in the CSV; the returned value carries a placeholder.
    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self, csv::Error> {
        let mut rdr = csv::Reader::from_reader(r);
        let names: Vec<String> =
            rdr.headers()?.iter().map(str::to_owned).collect();
        let mut values = Vec::new();
        let mut n_rows = 0;
        for record in rdr.records() {
            let record = record?;
            for field in record.iter() {
                values.push(field.parse::<f64>().unwrap_or(f64::NAN));
            }
            n_rows += 1;
        }
        Ok(PosteriorSamples {
            names,
            values,
            n_rows,
            config: ChainConfig::new(0),
            acceptance: Vec::new(),
        })
    }
}

/// One adaptive random-walk proposal scale.
#[derive(Debug, Clone)]
pub struct AdaptiveScale {
    log_scale: f64,
    adapt_steps: u64,
    accepts: f64,
    proposals: u64,
}

impl AdaptiveScale {
    pub fn new(initial: f64) -> Self {
        AdaptiveScale { log_scale: initial.ln(), adapt_steps: 0, accepts: 0.0, proposals: 0 }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Robbins-Monro step toward [`TARGET_ACCEPTANCE`]; no-op once
    /// adaptation is over.
    fn observe(&mut self, accept_prob: f64, adapting: bool) {
        self.accepts += accept_prob;
        self.proposals += 1;
        if adapting {
            self.adapt_steps += 1;
            let gain = (self.adapt_steps as f64).powf(-0.6);
            self.log_scale += gain * (accept_prob - TARGET_ACCEPTANCE);
        }
    }

    fn reset_counters(&mut self) {
        self.accepts = 0.0;
        self.proposals = 0;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepts / self.proposals as f64
        }
    }
}

/// Per-sweep handle the engine passes to the model: RNG plus the model's
/// adaptive Metropolis blocks.
pub struct SweepCtx<'a> {
    pub rng: &'a mut ChainRng,
    scales: &'a mut [AdaptiveScale],
    adapting: bool,
    iteration: usize,
}

impl SweepCtx<'_> {
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn scale(&self, block: usize) -> f64 {
        self.scales[block].scale()
    }

    /// One Gaussian random-walk Metropolis step on an unbounded
    /// coordinate. Returns the new value (the old one if rejected).
    /// `log_target` may return `-inf` outside the support; `NaN` aborts
    /// the chain.
    pub fn metropolis<F>(&mut self, block: usize, x: f64, log_target: F) -> Result<f64, McmcError>
    where
        F: Fn(f64) -> f64,
    {
        let lt_x = log_target(x);
        if lt_x.is_nan() {
            return Err(McmcError::NonFiniteLogDensity { iteration: self.iteration });
        }
        let step: f64 = self.scales[block].scale() * sample_std_normal(self.rng);
        let y = x + step;
        let lt_y = log_target(y);
        if lt_y.is_nan() {
            return Err(McmcError::NonFiniteLogDensity { iteration: self.iteration });
        }
        let log_ratio = lt_y - lt_x;
        let accept_prob = if log_ratio.is_nan() {
            // -inf at both points cannot happen from a valid state
            return Err(McmcError::NonFiniteLogDensity { iteration: self.iteration });
        } else {
            log_ratio.exp().min(1.0)
        };
        let u: f64 = self.rng.gen::<f64>();
        let accepted = u < accept_prob;
        self.scales[block].observe(accept_prob, self.adapting);
        Ok(if accepted { y } else { x })
    }
}

pub(crate) fn sample_std_normal(rng: &mut ChainRng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

use rand_distr::Distribution;

/// A model the engine can drive: initial state, recorded columns, one
/// sweep of updates, and a support predicate that every retained draw
/// must satisfy.
pub trait MwgModel {
    type State;

    fn initial_state(&self) -> Result<Self::State, McmcError>;
    fn column_names(&self) -> Vec<String>;
    fn record(&self, state: &Self::State, out: &mut Vec<f64>);
    /// One name per adaptive Metropolis block, in block-index order.
    fn scale_names(&self) -> Vec<String>;
    fn initial_scale(&self, _block: usize) -> f64 {
        0.5
    }
    fn sweep(&self, state: &mut Self::State, ctx: &mut SweepCtx<'_>) -> Result<(), McmcError>;
    fn in_support(&self, _state: &Self::State) -> bool {
        true
    }
}

/// Run one chain. Deterministic given `(model, config.seed)`; every
/// retained draw is checked against the model's support predicate and for
/// finiteness.
pub fn run_chain<M: MwgModel>(model: &M, config: &ChainConfig) -> Result<PosteriorSamples, McmcError> {
    config.validate()?;
    let mut rng = ChainRng::seed_from_u64(config.seed);
    let mut state = model.initial_state()?;
    if !model.in_support(&state) {
        return Err(McmcError::InitialStateRejected(
            "initial state violates the support predicate".into(),
        ));
    }

    let names = model.column_names();
    let scale_names = model.scale_names();
    let mut scales: Vec<AdaptiveScale> = (0..scale_names.len())
        .map(|b| AdaptiveScale::new(model.initial_scale(b)))
        .collect();

    let adapt_end = config.adapt_window.min(config.burn_in);
    let retained = config.retained();
    let mut values = Vec::with_capacity(retained * names.len());
    let mut row = Vec::with_capacity(names.len());

    for iteration in 0..config.iterations {
        if iteration == config.burn_in {
            for s in &mut scales {
                s.reset_counters();
            }
        }
        let mut ctx = SweepCtx {
            rng: &mut rng,
            scales: &mut scales,
            adapting: iteration < adapt_end,
            iteration,
        };
        model.sweep(&mut state, &mut ctx)?;

        let past_burn = iteration >= config.burn_in;
        if past_burn && (iteration - config.burn_in) % config.thin == config.thin - 1 {
            if !model.in_support(&state) {
                return Err(McmcError::SupportViolation { iteration });
            }
            row.clear();
            model.record(&state, &mut row);
            debug_assert_eq!(row.len(), names.len());
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(McmcError::NonFiniteValue {
                        iteration,
                        column: names[j].clone(),
                    });
                }
            }
            values.extend_from_slice(&row);
        }
    }

    let acceptance = scale_names
        .into_iter()
        .zip(&scales)
        .map(|(n, s)| (n, s.acceptance_rate()))
        .collect();

    Ok(PosteriorSamples { names, values, n_rows: retained, config: *config, acceptance })
}
