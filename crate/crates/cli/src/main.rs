//! Command-line entry point for fitting the small-area models,
//! running the comparison study, and post-processing fitted samples.
//!
//! Exit codes: 0 success, 1 validation error (bad flags or inputs),
//! 2 runtime or fit failure.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use infoprior::graph::{load_adjacency, RegionGraph};
use infoprior::informativeness::{
    beta_to_logitnormal, car_informativeness_at, logitnormal_informativeness, BetaParams,
    CarHyperState, LogitNormalParams,
};
use infoprior::io::{
    format_informativeness, load_counts, write_disparity_results, write_fit_results,
    write_study_results, FitConfig, OutputMetadata,
};
use infoprior::mcmc::{ChainConfig, PosteriorSamples};
use infoprior::models::{
    fit_beta_binomial, fit_car, fit_logitnormal, posterior_informativeness, CarModelSpec,
    CountData, FitResult, FittedModel, InformativenessConstraint, InvGammaPrior,
    DEFAULT_A_BOUNDS,
};
use infoprior::simulation::{run_study, ScenarioGrid, EXPECTED_EVENTS};
use infoprior::summaries::disparity;

#[derive(Parser)]
#[command(
    name = "infoprior",
    version,
    about = "Small-area binomial rate estimation with measured and constrained prior informativeness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the hierarchical beta-binomial model to one stratum
    FitBb(FitCommon),
    /// Fit the hierarchical logitnormal model to one stratum
    FitLn(FitLn),
    /// Fit the BYM/CAR spatial model to one stratum
    FitCar(FitCarArgs),
    /// Run the beta-binomial vs logitnormal comparison study
    Simulate(Simulate),
    /// Evaluate the informativeness measures directly
    Informativeness(Informativeness),
    /// Per-region posterior summary table from a samples CSV
    Summarize(Summarize),
    /// Per-region rate ratios between two fitted strata
    Disparity(Disparity),
}

#[derive(Args)]
struct ChainArgs {
    /// RNG seed governing all randomness of the run
    #[arg(long)]
    seed: Option<u64>,
    /// Total MCMC iterations (default 20000)
    #[arg(long)]
    iterations: Option<usize>,
    /// Burn-in iterations discarded from the front (default 5000)
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    /// Keep every k-th post-burn-in draw (default 3)
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Args)]
struct FitCommon {
    /// Counts CSV with header region_id,stratum,n,y
    #[arg(long)]
    counts: PathBuf,
    /// Stratum to fit (defaults to the only stratum in the table)
    #[arg(long)]
    stratum: Option<String>,
    /// TOML configuration file; command-line flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for samples.csv, summary.csv, diagnostics.csv, metadata.txt
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
    /// Summary quantiles, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.025, 0.5, 0.975])]
    quantiles: Vec<f64>,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args)]
struct FitLn {
    #[command(flatten)]
    common: FitCommon,
    /// Lower edge of the informativeness window
    #[arg(long = "a-min", default_value_t = DEFAULT_A_BOUNDS.0)]
    a_min: f64,
    /// Upper edge of the informativeness window
    #[arg(long = "a-max", default_value_t = DEFAULT_A_BOUNDS.1)]
    a_max: f64,
}

#[derive(Args)]
struct FitCarArgs {
    #[command(flatten)]
    common: FitCommon,
    /// Adjacency file: one `region_id: n1,n2,...` line per region
    #[arg(long)]
    adjacency: PathBuf,
    /// Constrain the global informativeness below this value
    #[arg(long = "constrain-a0")]
    constrain_a0: Option<f64>,
    /// Lower bound of the constraint window (with --constrain-a0)
    #[arg(long = "a0-min", default_value_t = 0.0)]
    a0_min: f64,
    /// Reference neighbor count of the global measure
    #[arg(long, default_value_t = 3)]
    m0: u32,
}

#[derive(Args)]
struct Simulate {
    /// Region counts, comma separated
    #[arg(long = "I", value_delimiter = ',', default_values_t = [100usize])]
    regions: Vec<usize>,
    /// True informativeness levels, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [4.0, 8.0, 12.0, 16.0, 20.0])]
    a: Vec<f64>,
    /// True mean rates, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10, 0.20, 0.40])]
    pi0: Vec<f64>,
    /// Replicates per cell
    #[arg(long = "L", default_value_t = 100)]
    replicates: usize,
    /// Worker threads for parallel replicates (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory for study_replicates.csv, study_cells.csv, metadata.txt
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args)]
struct Informativeness {
    /// Logit-scale location (or the linear predictor for the CAR bound)
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["a", "b"])]
    mu: Option<f64>,
    /// Logit-scale (heterogeneity) variance
    #[arg(long, requires = "mu")]
    sigma2: Option<f64>,
    /// CAR conditional variance; switches to the CAR bound
    #[arg(long, requires = "sigma2")]
    tau2: Option<f64>,
    /// Neighbor count for the CAR bound
    #[arg(long, default_value_t = 3)]
    m: u32,
    /// Beta prior events; with --b, reports the moment-matched
    /// logitnormal parameters and their informativeness
    #[arg(long, requires = "b")]
    a: Option<f64>,
    /// Beta prior non-events
    #[arg(long, requires = "a")]
    b: Option<f64>,
}

#[derive(Args)]
struct Summarize {
    /// samples.csv produced by a fit subcommand
    samples: PathBuf,
    /// Optional counts CSV to add crude rates
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Stratum for the crude-rate column (with --counts)
    #[arg(long)]
    stratum: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.025, 0.5, 0.975])]
    quantiles: Vec<f64>,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct Disparity {
    /// samples.csv of the comparison stratum (ratio numerator)
    comparison: PathBuf,
    /// samples.csv of the reference stratum (ratio denominator)
    reference: PathBuf,
    #[arg(long = "out-dir", default_value = "out")]
    out_dir: PathBuf,
}

/// Errors carry the exit code distinguishing validation (1) from
/// runtime/fit (2) failures.
struct AppError {
    code: u8,
    inner: anyhow::Error,
}

type AppResult<T> = Result<T, AppError>;

trait Stage<T> {
    fn validation(self) -> AppResult<T>;
    fn runtime(self) -> AppResult<T>;
}

impl<T, E: Into<anyhow::Error>> Stage<T> for Result<T, E> {
    fn validation(self) -> AppResult<T> {
        self.map_err(|e| AppError { code: 1, inner: e.into() })
    }

    fn runtime(self) -> AppResult<T> {
        self.map_err(|e| AppError { code: 2, inner: e.into() })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == clap::error::ErrorKind::DisplayHelp
                || e.kind() == clap::error::ErrorKind::DisplayVersion =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError { code, inner }) => {
            eprintln!("error: {inner:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::FitBb(args) => fit_command(args, Model::BetaBinomial),
        Command::FitLn(args) => {
            fit_command(args.common, Model::Logitnormal(args.a_min, args.a_max))
        }
        Command::FitCar(args) => {
            let graph = read_graph(&args.adjacency)?;
            let mut spec = CarModelSpec::new(graph);
            apply_prior_config(&mut spec, args.common.config.as_deref())?;
            if let Some(a0_max) = args.constrain_a0 {
                spec.constraint = Some(
                    InformativenessConstraint::new(args.a0_min, a0_max, args.m0).validation()?,
                );
            }
            fit_command(args.common, Model::Car(Box::new(spec)))
        }
        Command::Simulate(args) => simulate_command(args),
        Command::Informativeness(args) => informativeness_command(args),
        Command::Summarize(args) => summarize_command(args),
        Command::Disparity(args) => disparity_command(args),
    }
}

enum Model {
    BetaBinomial,
    Logitnormal(f64, f64),
    Car(Box<CarModelSpec>),
}

fn read_graph(path: &Path) -> AppResult<RegionGraph> {
    let file = File::open(path)
        .with_context(|| format!("cannot open adjacency file {}", path.display()))
        .validation()?;
    let graph = load_adjacency(BufReader::new(file)).validation()?;
    let components = graph.component_count();
    if components > 1 {
        eprintln!(
            "warning: adjacency graph is disconnected ({components} components); \
             each component is smoothed separately"
        );
    }
    Ok(graph)
}

fn apply_prior_config(spec: &mut CarModelSpec, config: Option<&Path>) -> AppResult<()> {
    let Some(path) = config else { return Ok(()) };
    let config = FitConfig::from_path(path).validation()?;
    if let Some(p) = config.priors {
        let s = spec.sigma2_prior;
        spec.sigma2_prior = InvGammaPrior::new(
            p.sigma2_shape.unwrap_or(s.shape),
            p.sigma2_scale.unwrap_or(s.scale),
        )
        .validation()?;
        let t = spec.tau2_prior;
        spec.tau2_prior = InvGammaPrior::new(
            p.tau2_shape.unwrap_or(t.shape),
            p.tau2_scale.unwrap_or(t.scale),
        )
        .validation()?;
    }
    if let Some(c) = config.constraint {
        spec.constraint = Some(
            InformativenessConstraint::new(c.a0_min, c.a0_max, c.m0.unwrap_or(3)).validation()?,
        );
    }
    Ok(())
}

fn resolve_chain(args: &ChainArgs, config: Option<&FitConfig>) -> ChainConfig {
    let mut chain = ChainConfig::new(0);
    if let Some(c) = config {
        if let Some(v) = c.iterations {
            chain.iterations = v;
        }
        if let Some(v) = c.burn_in {
            chain.burn_in = v;
        }
        if let Some(v) = c.thin {
            chain.thin = v;
        }
        if let Some(v) = c.seed {
            chain.seed = v;
        }
        if let Some(v) = c.adapt_window {
            chain.adapt_window = v;
        }
    }
    if let Some(v) = args.iterations {
        chain.iterations = v;
    }
    if let Some(v) = args.burn_in {
        chain.burn_in = v;
    }
    if let Some(v) = args.thin {
        chain.thin = v;
    }
    if let Some(v) = args.seed {
        chain.seed = v;
    }
    chain.adapt_window = chain.adapt_window.min(chain.burn_in);
    chain
}

fn read_stratum_data(
    counts: &Path,
    stratum: Option<&str>,
    graph: Option<&RegionGraph>,
) -> AppResult<CountData> {
    let file = File::open(counts)
        .with_context(|| format!("cannot open counts file {}", counts.display()))
        .validation()?;
    let (table, warnings) = load_counts(BufReader::new(file)).validation()?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let strata = table.strata();
    let stratum = match stratum {
        Some(s) => s.to_string(),
        None if strata.len() == 1 => strata[0].clone(),
        None => {
            return Err(anyhow!(
                "table has {} strata ({}); pick one with --stratum",
                strata.len(),
                strata.join(", ")
            ))
            .validation()
        }
    };
    table.stratum_data(&stratum, graph).validation()
}

fn fit_command(args: FitCommon, model: Model) -> AppResult<()> {
    let config = match &args.config {
        Some(path) => Some(FitConfig::from_path(path).validation()?),
        None => None,
    };
    let chain = resolve_chain(&args.chain, config.as_ref());
    chain.validate().validation()?;
    let stratum = args
        .stratum
        .clone()
        .or_else(|| config.as_ref().and_then(|c| c.stratum.clone()));

    let mut meta = OutputMetadata::new();
    meta.set_chain(&chain);
    meta.set("counts", args.counts.display());
    meta.set(
        "quantiles",
        args.quantiles.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(","),
    );

    let (fit, data) = match model {
        Model::BetaBinomial => {
            let data = read_stratum_data(&args.counts, stratum.as_deref(), None)?;
            meta.set("model", "beta-binomial");
            meta.set("stratum", data.stratum());
            (fit_beta_binomial(&data, &chain).runtime()?, data)
        }
        Model::Logitnormal(a_min, a_max) => {
            let data = read_stratum_data(&args.counts, stratum.as_deref(), None)?;
            meta.set("model", "logitnormal");
            meta.set("stratum", data.stratum());
            meta.set("a_bounds", format!("({a_min}, {a_max})"));
            (fit_logitnormal(&data, &chain, (a_min, a_max)).runtime()?, data)
        }
        Model::Car(spec) => {
            let data = read_stratum_data(&args.counts, stratum.as_deref(), Some(&spec.graph))?;
            meta.set("model", "car");
            meta.set("stratum", data.stratum());
            meta.set(
                "sigma2_prior",
                format!("IG({}, {})", spec.sigma2_prior.shape, spec.sigma2_prior.scale),
            );
            meta.set(
                "tau2_prior",
                format!("IG({}, {})", spec.tau2_prior.shape, spec.tau2_prior.scale),
            );
            match &spec.constraint {
                Some(c) => {
                    meta.set("constraint_a0_max", c.a0_max);
                    meta.set("constraint_a0_min", c.a0_min);
                    meta.set("constraint_m0", c.m0);
                }
                None => {
                    meta.set("constraint", "none");
                }
            }
            (fit_car(&data, &spec, &chain).runtime()?, data)
        }
    };

    let paths =
        write_fit_results(&args.out_dir, &fit, Some(&data), &args.quantiles, &meta).runtime()?;
    let info = posterior_informativeness(&fit);
    println!("{}", format_informativeness(fit.informativeness_name(), &info));
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn simulate_command(args: Simulate) -> AppResult<()> {
    let base_seed = args.chain.seed.unwrap_or(0);
    let grid = ScenarioGrid {
        region_counts: args.regions.clone(),
        informativeness: args.a.clone(),
        mean_rates: args.pi0.clone(),
        replicates: args.replicates,
        base_seed,
    };
    grid.validate().validation()?;
    let chain = resolve_chain(&args.chain, None);
    chain.validate().validation()?;

    let study = run_study(&grid, &chain, args.jobs).runtime()?;

    let mut meta = OutputMetadata::new();
    meta.set_chain(&chain);
    meta.set("base_seed", base_seed);
    meta.set("replicates_per_cell", args.replicates);
    meta.set("region_counts", join(&args.regions));
    meta.set("informativeness_levels", join(&args.a));
    meta.set("mean_rates", join(&args.pi0));
    meta.set(
        "trial_count_rule",
        format!(
            "uniform integer on [ceil({}/pi0), floor({}/pi0)]",
            EXPECTED_EVENTS.0, EXPECTED_EVENTS.1
        ),
    );
    let paths = write_study_results(&args.out_dir, &study, &meta).runtime()?;
    let failed = study
        .replicates
        .iter()
        .filter(|r| r.beta.is_err() || r.logitnormal.is_err())
        .count();
    println!(
        "study finished: {} replicates across {} cells ({failed} failed fits)",
        study.replicates.len(),
        grid.cells().len()
    );
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn informativeness_command(args: Informativeness) -> AppResult<()> {
    match (args.mu, args.sigma2, args.a, args.b) {
        (Some(mu), Some(sigma2), None, None) => {
            if let Some(tau2) = args.tau2 {
                let h = CarHyperState::new(mu, sigma2, tau2, args.m).validation()?;
                println!("a_hat = {:.3}", car_informativeness_at(&h, args.m));
            } else {
                let p = LogitNormalParams::new(mu, sigma2).validation()?;
                println!("a_hat = {:.3}", logitnormal_informativeness(&p));
            }
            Ok(())
        }
        (None, None, Some(a), Some(b)) => {
            let prior = BetaParams::new(a, b).validation()?;
            let p = beta_to_logitnormal(&prior);
            println!("mu = {:.6}", p.mu());
            println!("sigma2 = {:.6}", p.sigma2());
            println!("a_hat = {:.3}", logitnormal_informativeness(&p));
            Ok(())
        }
        _ => Err(anyhow!("pass either --mu and --sigma2, or --a and --b")).validation(),
    }
}

fn read_fit(path: &Path) -> AppResult<FitResult> {
    let file = File::open(path)
        .with_context(|| format!("cannot open samples file {}", path.display()))
        .validation()?;
    let samples = PosteriorSamples::read_csv(BufReader::new(file)).validation()?;
    FitResult::from_samples(FittedModel::Car, samples).validation()
}

fn summarize_command(args: Summarize) -> AppResult<()> {
    let fit = read_fit(&args.samples)?;
    let data = match &args.counts {
        Some(counts) => Some(read_stratum_data(counts, args.stratum.as_deref(), None)?),
        None => None,
    };
    let mut meta = OutputMetadata::new();
    meta.set("source_samples", args.samples.display());
    meta.set(
        "quantiles",
        args.quantiles.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(","),
    );
    let paths =
        write_fit_results(&args.out_dir, &fit, data.as_ref(), &args.quantiles, &meta).runtime()?;
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn disparity_command(args: Disparity) -> AppResult<()> {
    let comparison = read_fit(&args.comparison)?;
    let reference = read_fit(&args.reference)?;
    let rows = disparity(&comparison, &reference).validation()?;
    let significant = rows.iter().filter(|r| r.significant).count();
    let mut meta = OutputMetadata::new();
    meta.set("comparison_samples", args.comparison.display());
    meta.set("reference_samples", args.reference.display());
    meta.set(
        "caveat",
        "strata may overlap (e.g. race groups that are not mutually exclusive); \
         ratios are interpreted per stratum definition",
    );
    let paths = write_disparity_results(&args.out_dir, &rows, &meta).runtime()?;
    println!("{significant} of {} regions flagged significant", rows.len());
    for path in paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
