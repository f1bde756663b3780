//! Comparison study: generate beta-binomial data over a grid of region
//! counts, informativeness levels, and mean rates, fit both hierarchical
//! models to every replicate, and compare RMSEs.
//!
//! Replicates are embarrassingly parallel. With the `parallel` feature
//! (on by default) [`run_study`] fans the fits out over a rayon pool;
//! [`run_study_sequential`] is always available and produces identical
//! results, because every replicate derives its own seed from
//! `(base seed, cell index, replicate index)` and aggregation is
//! order-independent.

use rand::SeedableRng;
use rand_distr::{Binomial, Distribution, Uniform};
use thiserror::Error;

use crate::mcmc::{ChainConfig, ChainRng};
use crate::models::{
    fit_beta_binomial, fit_logitnormal, CountData, FitError, DEFAULT_A_BOUNDS,
};
use crate::stats::mean;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("scenario grid invalid: {0}")]
    InvalidGrid(String),
    #[error("expected event range degenerate at pi0 = {pi0}: ceil(1/pi0) > floor(20/pi0)")]
    DegenerateTrialRange { pi0: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Trial counts are drawn uniformly on the integer range that keeps the
/// expected event count per region inside `[1, 20]`.
pub const EXPECTED_EVENTS: (f64, f64) = (1.0, 20.0);

/// The scenario grid of the comparison study.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGrid {
    pub region_counts: Vec<usize>,
    pub informativeness: Vec<f64>,
    pub mean_rates: Vec<f64>,
    pub replicates: usize,
    pub base_seed: u64,
}

impl ScenarioGrid {
    /// The full published grid: I in {50, 100, 200}, a in {4, 8, ..., 20},
    /// pi0 in {0.01, 0.05, 0.10, 0.20, 0.40}, 100 replicates per cell.
    pub fn full(base_seed: u64) -> Self {
        ScenarioGrid {
            region_counts: vec![50, 100, 200],
            informativeness: vec![4.0, 8.0, 12.0, 16.0, 20.0],
            mean_rates: vec![0.01, 0.05, 0.10, 0.20, 0.40],
            replicates: 100,
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.region_counts.is_empty()
            || self.informativeness.is_empty()
            || self.mean_rates.is_empty()
        {
            return Err(StudyError::InvalidGrid("every grid axis needs at least one level".into()));
        }
        if self.region_counts.iter().any(|&i| i == 0) {
            return Err(StudyError::InvalidGrid("region counts must be positive".into()));
        }
        if self.informativeness.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(StudyError::InvalidGrid("informativeness levels must be positive".into()));
        }
        if self.mean_rates.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(StudyError::InvalidGrid("mean rates must lie in (0, 1)".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &i in &self.region_counts {
            for &a in &self.informativeness {
                for &pi0 in &self.mean_rates {
                    cells.push(Cell { regions: i, a, pi0 });
                }
            }
        }
        cells
    }
}

/// One grid cell: a (region count, informativeness, mean rate) triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub regions: usize,
    pub a: f64,
    pub pi0: f64,
}

/// Posterior means extracted from one model fit of one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateEstimate {
    pub informativeness_mean: f64,
    pub pi0_mean: f64,
}

/// Per-replicate record: both models fitted to the same dataset.
#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub cell: Cell,
    pub replicate: usize,
    pub beta: Result<ReplicateEstimate, String>,
    pub logitnormal: Result<ReplicateEstimate, String>,
}

/// Which estimand an RMSE targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Informativeness,
    MeanRate,
}

/// RMSE pair and ratio for one cell and one target. The ratio is
/// RMSE(logitnormal) / RMSE(beta), so values above one favor the
/// beta-binomial model. A zero denominator is flagged, not thrown.
#[derive(Debug, Clone, Copy)]
pub struct RmseRatio {
    pub cell: Cell,
    pub target: Target,
    pub rmse_beta: f64,
    pub rmse_logitnormal: f64,
    pub ratio: f64,
    pub zero_denominator: bool,
}

/// All per-replicate records of a finished study, in deterministic
/// (cell-major, replicate-minor) order.
#[derive(Debug, Clone, Default)]
pub struct StudyResult {
    pub replicates: Vec<ReplicateResult>,
}

impl StudyResult {
    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = Vec::new();
        for r in &self.replicates {
            if cells.last() != Some(&r.cell) && !cells.contains(&r.cell) {
                cells.push(r.cell);
            }
        }
        cells
    }

    /// Mean over replicates of the posterior-mean estimates, per model.
    /// Failed fits are skipped.
    pub fn cell_average(&self, cell: Cell) -> (Option<ReplicateEstimate>, Option<ReplicateEstimate>) {
        let collect = |pick: &dyn Fn(&ReplicateResult) -> Option<ReplicateEstimate>| {
            let rows: Vec<ReplicateEstimate> =
                self.replicates.iter().filter(|r| r.cell == cell).filter_map(pick).collect();
            if rows.is_empty() {
                None
            } else {
                Some(ReplicateEstimate {
                    informativeness_mean: mean(
                        &rows.iter().map(|e| e.informativeness_mean).collect::<Vec<_>>(),
                    ),
                    pi0_mean: mean(&rows.iter().map(|e| e.pi0_mean).collect::<Vec<_>>()),
                })
            }
        };
        (
            collect(&|r| r.beta.as_ref().ok().copied()),
            collect(&|r| r.logitnormal.as_ref().ok().copied()),
        )
    }
}

/// Generate one dataset: `b = a (1 - pi0) / pi0`, rates from
/// `Beta(a, b)`, trials uniform on the integer range implied by
/// [`EXPECTED_EVENTS`], events binomial.
pub fn generate_dataset(
    regions: usize,
    a: f64,
    pi0: f64,
    seed: u64,
) -> Result<CountData, StudyError> {
    if !(pi0 > 0.0 && pi0 < 1.0) || !(a > 0.0 && a.is_finite()) || regions == 0 {
        return Err(StudyError::InvalidGrid(format!(
            "invalid cell: regions {regions}, a {a}, pi0 {pi0}"
        )));
    }
    let (n_lo, n_hi) = trial_range(pi0)?;
    let mut rng = ChainRng::seed_from_u64(seed);
    let b = a * (1.0 - pi0) / pi0;
    let beta = rand_distr::Beta::new(a, b).expect("positive beta parameters");
    let n_dist = Uniform::new_inclusive(n_lo, n_hi);
    let mut ns = Vec::with_capacity(regions);
    let mut ys = Vec::with_capacity(regions);
    for _ in 0..regions {
        let n = n_dist.sample(&mut rng);
        let p: f64 = beta.sample(&mut rng);
        let y = Binomial::new(n, p.clamp(0.0, 1.0)).expect("valid rate").sample(&mut rng);
        ns.push(n);
        ys.push(y);
    }
    let ids = (0..regions).map(|k| format!("r{:03}", k + 1)).collect();
    Ok(CountData::new(ids, ns, ys, "sim").map_err(|e| StudyError::InvalidGrid(e.to_string()))?)
}

/// Integer trial range `[ceil(1/pi0), floor(20/pi0)]`.
pub fn trial_range(pi0: f64) -> Result<(u64, u64), StudyError> {
    let lo = (EXPECTED_EVENTS.0 / pi0).ceil() as u64;
    let hi = (EXPECTED_EVENTS.1 / pi0).floor() as u64;
    if lo > hi {
        return Err(StudyError::DegenerateTrialRange { pi0 });
    }
    Ok((lo, hi))
}

/// SplitMix64 step, used to derive independent per-replicate seeds.
fn mix_seed(base: u64, cell_index: u64, replicate: u64) -> u64 {
    let mut z = base
        .wrapping_add(cell_index.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(replicate.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn run_replicate(cell: Cell, cell_index: usize, replicate: usize, grid: &ScenarioGrid, chain: &ChainConfig) -> ReplicateResult {
    let data_seed = mix_seed(grid.base_seed, cell_index as u64, replicate as u64);
    let fit_one = |offset: u64, fit: &dyn Fn(&CountData, &ChainConfig) -> Result<ReplicateEstimate, FitError>| {
        match generate_dataset(cell.regions, cell.a, cell.pi0, data_seed) {
            Ok(data) => {
                let config = ChainConfig { seed: data_seed ^ offset, ..*chain };
                fit(&data, &config).map_err(|e| e.to_string())
            }
            Err(e) => Err(e.to_string()),
        }
    };
    let beta = fit_one(0x5eed_0001, &|data, config| {
        let fit = fit_beta_binomial(data, config)?;
        Ok(ReplicateEstimate {
            informativeness_mean: mean(&fit.informativeness_draws()),
            pi0_mean: fit.posterior_mean("pi0").expect("pi0 column"),
        })
    });
    let logitnormal = fit_one(0x5eed_0002, &|data, config| {
        let fit = fit_logitnormal(data, config, DEFAULT_A_BOUNDS)?;
        Ok(ReplicateEstimate {
            informativeness_mean: mean(&fit.informativeness_draws()),
            pi0_mean: fit.posterior_mean("pi0").expect("pi0 column"),
        })
    });
    ReplicateResult { cell, replicate, beta, logitnormal }
}

fn tasks(grid: &ScenarioGrid) -> Vec<(usize, Cell, usize)> {
    let mut out = Vec::new();
    for (ci, cell) in grid.cells().into_iter().enumerate() {
        for rep in 0..grid.replicates {
            out.push((ci, cell, rep));
        }
    }
    out
}

/// Run the study sequentially. Identical output to [`run_study`].
pub fn run_study_sequential(
    grid: &ScenarioGrid,
    chain: &ChainConfig,
) -> Result<StudyResult, StudyError> {
    grid.validate()?;
    let replicates = tasks(grid)
        .into_iter()
        .map(|(ci, cell, rep)| run_replicate(cell, ci, rep, grid, chain))
        .collect();
    Ok(StudyResult { replicates })
}

/// Run the study, fanning replicates out over a rayon pool when the
/// `parallel` feature is enabled (`jobs = None` uses the default pool
/// size). Results are deterministic regardless of thread count.
#[cfg(feature = "parallel")]
pub fn run_study(
    grid: &ScenarioGrid,
    chain: &ChainConfig,
    jobs: Option<usize>,
) -> Result<StudyResult, StudyError> {
    use rayon::prelude::*;
    grid.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| StudyError::InvalidGrid(format!("thread pool: {e}")))?;
    let work = tasks(grid);
    let replicates = pool.install(|| {
        work.into_par_iter()
            .map(|(ci, cell, rep)| run_replicate(cell, ci, rep, grid, chain))
            .collect()
    });
    Ok(StudyResult { replicates })
}

/// Sequential fallback when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn run_study(
    grid: &ScenarioGrid,
    chain: &ChainConfig,
    _jobs: Option<usize>,
) -> Result<StudyResult, StudyError> {
    run_study_sequential(grid, chain)
}

/// Per-cell RMSEs against the cell's true value, for one target.
pub fn rmse_ratio(result: &StudyResult, target: Target) -> Vec<RmseRatio> {
    result
        .cells()
        .into_iter()
        .map(|cell| {
            let truth = match target {
                Target::Informativeness => cell.a,
                Target::MeanRate => cell.pi0,
            };
            let pick = |e: &ReplicateEstimate| match target {
                Target::Informativeness => e.informativeness_mean,
                Target::MeanRate => e.pi0_mean,
            };
            let rmse = |side: &dyn Fn(&ReplicateResult) -> Option<ReplicateEstimate>| {
                let sq: Vec<f64> = result
                    .replicates
                    .iter()
                    .filter(|r| r.cell == cell)
                    .filter_map(side)
                    .map(|e| {
                        let d = pick(&e) - truth;
                        d * d
                    })
                    .collect();
                if sq.is_empty() {
                    f64::NAN
                } else {
                    mean(&sq).sqrt()
                }
            };
            let rmse_beta = rmse(&|r| r.beta.as_ref().ok().copied());
            let rmse_logitnormal = rmse(&|r| r.logitnormal.as_ref().ok().copied());
            let zero = rmse_beta == 0.0;
            RmseRatio {
                cell,
                target,
                rmse_beta,
                rmse_logitnormal,
                ratio: if zero { f64::NAN } else { rmse_logitnormal / rmse_beta },
                zero_denominator: zero,
            }
        })
        .collect()
}
