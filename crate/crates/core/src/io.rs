//! Count-table ingestion, fit configuration, and stable result output.
//!
//! All numeric output is serialized at 12 significant digits and every
//! result directory gets a flat key-value metadata sidecar (seed, config
//! hash, constraint settings, software version), so identical inputs
//! produce byte-identical files and runs stay distinguishable after the
//! fact.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::fmt::fmt_sig12;
use crate::graph::RegionGraph;
use crate::models::{
    CountData, FitError, FitResult, InformativenessSummary, posterior_informativeness,
};
use crate::simulation::{rmse_ratio, StudyResult, Target};
use crate::summaries::{crude_rates, summarize, DisparityEstimate, SummaryError};

pub const COUNTS_HEADER: [&str; 4] = ["region_id", "stratum", "n", "y"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header `region_id,stratum,n,y`, got `{0}`")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRow { line: u64, message: String },
    #[error("line {line}: duplicate key ({region_id}, {stratum})")]
    DuplicateKey { line: u64, region_id: String, stratum: String },
    #[error("stratum `{0}` not present in the table")]
    UnknownStratum(String),
    #[error("stratum `{stratum}` does not cover graph region `{region_id}`")]
    MissingRegion { stratum: String, region_id: String },
    #[error("config parse error: {0}")]
    Config(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Summary(#[from] SummaryError),
}

/// One row of the counts file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountRow {
    pub region_id: String,
    pub stratum: String,
    pub n: u64,
    pub y: u64,
}

/// Validated (region, stratum) count table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountTable {
    rows: Vec<CountRow>,
}

impl CountTable {
    pub fn rows(&self) -> &[CountRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Strata in first-appearance order.
    pub fn strata(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for row in &self.rows {
            if !out.contains(&row.stratum) {
                out.push(row.stratum.clone());
            }
        }
        out
    }

    /// Extract one stratum as fit-ready count data. With a graph, rows
    /// are aligned to graph order and must cover every graph region;
    /// without one, table order is kept.
    pub fn stratum_data(
        &self,
        stratum: &str,
        graph: Option<&RegionGraph>,
    ) -> Result<CountData, DataError> {
        let rows: Vec<&CountRow> =
            self.rows.iter().filter(|r| r.stratum == stratum).collect();
        if rows.is_empty() {
            return Err(DataError::UnknownStratum(stratum.to_string()));
        }
        let picked: Vec<&CountRow> = match graph {
            None => rows,
            Some(g) => {
                let mut ordered = Vec::with_capacity(g.len());
                for id in g.region_ids() {
                    let row = rows
                        .iter()
                        .find(|r| &r.region_id == id)
                        .ok_or_else(|| DataError::MissingRegion {
                            stratum: stratum.to_string(),
                            region_id: id.clone(),
                        })?;
                    ordered.push(*row);
                }
                ordered
            }
        };
        Ok(CountData::new(
            picked.iter().map(|r| r.region_id.clone()).collect(),
            picked.iter().map(|r| r.n).collect(),
            picked.iter().map(|r| r.y).collect(),
            stratum,
        )?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(COUNTS_HEADER)?;
        for row in &self.rows {
            wtr.write_record([
                row.region_id.as_str(),
                row.stratum.as_str(),
                &row.n.to_string(),
                &row.y.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Parse and validate a counts CSV. Malformed rows are reported with
/// their line number. A header-only file yields an empty table plus a
/// warning.
pub fn load_counts<R: Read>(source: R) -> Result<(CountTable, Vec<String>), DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = rdr.headers()?.clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields != COUNTS_HEADER {
        return Err(DataError::BadHeader(fields.join(",")));
    }
    let mut rows = Vec::new();
    let mut seen: BTreeMap<(String, String), u64> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(DataError::BadRow {
                line,
                message: format!("expected 4 fields, got {}", record.len()),
            });
        }
        let region_id = record[0].to_string();
        let stratum = record[1].to_string();
        if region_id.is_empty() || stratum.is_empty() {
            return Err(DataError::BadRow {
                line,
                message: "region_id and stratum must be non-empty".into(),
            });
        }
        let parse = |field: &str, name: &str| -> Result<u64, DataError> {
            field.parse::<u64>().map_err(|_| DataError::BadRow {
                line,
                message: format!("{name} must be a non-negative integer, got `{field}`"),
            })
        };
        let n = parse(&record[2], "n")?;
        let y = parse(&record[3], "y")?;
        if y > n {
            return Err(DataError::BadRow {
                line,
                message: format!("events y = {y} exceed trials n = {n}"),
            });
        }
        if seen.insert((region_id.clone(), stratum.clone()), line).is_some() {
            return Err(DataError::DuplicateKey { line, region_id, stratum });
        }
        rows.push(CountRow { region_id, stratum, n, y });
    }
    let mut warnings = Vec::new();
    if rows.is_empty() {
        warnings.push("counts file has a header but no rows".to_string());
    }
    Ok((CountTable { rows }, warnings))
}

/// Fit configuration file (TOML). Command-line flags override fields.
#[derive(Debug, Clone, Deserialize, Default, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub model: Option<String>,
    pub stratum: Option<String>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub adapt_window: Option<usize>,
    pub a_bounds: Option<(f64, f64)>,
    pub constraint: Option<ConstraintConfig>,
    pub priors: Option<PriorConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub a0_max: f64,
    #[serde(default)]
    pub a0_min: f64,
    pub m0: Option<u32>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub sigma2_shape: Option<f64>,
    pub sigma2_scale: Option<f64>,
    pub tau2_shape: Option<f64>,
    pub tau2_scale: Option<f64>,
}

impl FitConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, DataError> {
        toml::from_str(text).map_err(|e| DataError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self, DataError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Flat key-value sidecar describing a run. Written sorted so identical
/// settings give identical bytes; the config hash covers every entry.
#[derive(Debug, Clone, Default)]
pub struct OutputMetadata {
    entries: BTreeMap<String, String>,
}

impl OutputMetadata {
    pub fn new() -> Self {
        let mut meta = OutputMetadata { entries: BTreeMap::new() };
        meta.set("software_version", env!("CARGO_PKG_VERSION"));
        meta
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_chain(&mut self, config: &crate::mcmc::ChainConfig) -> &mut Self {
        self.set("seed", config.seed);
        self.set("iterations", config.iterations);
        self.set("burn_in", config.burn_in);
        self.set("thin", config.thin);
        self.set("adapt_window", config.adapt_window);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn config_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for (k, v) in &self.entries {
            h.write(k.as_bytes());
            h.write(&[0]);
            h.write(v.as_bytes());
            h.write(&[0xff]);
        }
        h.finish()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), DataError> {
        for (k, v) in &self.entries {
            writeln!(w, "{k}: {v}")?;
        }
        writeln!(w, "config_hash: {:016x}", self.config_hash())?;
        Ok(())
    }
}

fn quantile_header(p: f64) -> String {
    let pct = p * 100.0;
    let s = format!("{pct}");
    format!("q{s}")
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, std::fs::File), DataError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((path.clone(), std::fs::File::create(path)?))
}

/// Write the full file set for one fit: retained samples, the per-region
/// summary (crude rate, posterior mean/sd/quantiles, informativeness
/// summary columns), chain diagnostics, and the metadata sidecar.
/// Returns the written paths.
pub fn write_fit_results(
    dir: &Path,
    fit: &FitResult,
    data: Option<&CountData>,
    quantiles: &[f64],
    meta: &OutputMetadata,
) -> Result<Vec<PathBuf>, DataError> {
    let mut written = Vec::new();

    let (path, file) = create(dir, "samples.csv")?;
    fit.samples.write_csv(file)?;
    written.push(path);

    let rows = summarize(fit, quantiles)?;
    let info = posterior_informativeness(fit);
    let crude: Vec<Option<f64>> = match data {
        Some(d) => crude_rates(d),
        None => vec![None; fit.n_regions()],
    };
    let (path, file) = create(dir, "summary.csv")?;
    let mut wtr = csv::Writer::from_writer(file);
    let mut header = vec!["region_id".to_string(), "crude_rate".to_string(), "post_mean".to_string(), "post_sd".to_string()];
    header.extend(quantiles.iter().map(|&q| quantile_header(q)));
    header.extend(
        ["info_measure", "info_mean", "info_median", "info_q2.5", "info_q97.5"]
            .map(str::to_string),
    );
    wtr.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut record = vec![
            row.region_id.clone(),
            crude[i].map(fmt_sig12).unwrap_or_else(|| "NA".to_string()),
            fmt_sig12(row.mean),
            fmt_sig12(row.sd),
        ];
        record.extend(row.quantiles.iter().map(|&q| fmt_sig12(q)));
        record.push(fit.informativeness_name().to_string());
        record.push(fmt_sig12(info.mean));
        record.push(fmt_sig12(info.median));
        record.push(fmt_sig12(info.q2_5));
        record.push(fmt_sig12(info.q97_5));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    written.push(path);

    let (path, file) = create(dir, "diagnostics.csv")?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(["parameter", "ess", "geweke_z", "degenerate"])?;
    for ((name, ess), (_, z)) in fit.diagnostics.ess.iter().zip(&fit.diagnostics.geweke_z) {
        wtr.write_record([
            name.as_str(),
            &fmt_sig12(*ess),
            &fmt_sig12(*z),
            if fit.diagnostics.degenerate.contains(name) { "true" } else { "false" },
        ])?;
    }
    wtr.flush()?;
    written.push(path);

    written.push(write_metadata(dir, meta)?);
    Ok(written)
}

/// Disparity CSV: one row per region with ratio summaries and the
/// significance flag.
pub fn write_disparity_results(
    dir: &Path,
    rows: &[DisparityEstimate],
    meta: &OutputMetadata,
) -> Result<Vec<PathBuf>, DataError> {
    let (path, file) = create(dir, "disparity.csv")?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record(["region_id", "ratio_mean", "ratio_median", "q2.5", "q97.5", "significant"])?;
    for row in rows {
        wtr.write_record([
            row.region_id.as_str(),
            &fmt_sig12(row.ratio_mean),
            &fmt_sig12(row.ratio_median),
            &fmt_sig12(row.q2_5),
            &fmt_sig12(row.q97_5),
            if row.significant { "true" } else { "false" },
        ])?;
    }
    wtr.flush()?;
    Ok(vec![path, write_metadata(dir, meta)?])
}

/// Study CSVs: one row per (cell, replicate, model) with posterior
/// means, plus a per-cell summary with RMSEs and ratios for both
/// targets.
pub fn write_study_results(
    dir: &Path,
    study: &StudyResult,
    meta: &OutputMetadata,
) -> Result<Vec<PathBuf>, DataError> {
    let (rep_path, file) = create(dir, "study_replicates.csv")?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record([
        "regions", "a_true", "pi0_true", "replicate", "model", "status", "info_post_mean",
        "pi0_post_mean",
    ])?;
    for rep in &study.replicates {
        for (model, outcome) in [("beta-binomial", &rep.beta), ("logitnormal", &rep.logitnormal)]
        {
            let (status, info, pi0) = match outcome {
                Ok(est) => {
                    ("ok".to_string(), fmt_sig12(est.informativeness_mean), fmt_sig12(est.pi0_mean))
                }
                Err(e) => (format!("error: {e}"), "NA".into(), "NA".into()),
            };
            wtr.write_record([
                &rep.cell.regions.to_string(),
                &fmt_sig12(rep.cell.a),
                &fmt_sig12(rep.cell.pi0),
                &rep.replicate.to_string(),
                model,
                &status,
                &info,
                &pi0,
            ])?;
        }
    }
    wtr.flush()?;

    let (cell_path, file) = create(dir, "study_cells.csv")?;
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record([
        "regions",
        "a_true",
        "pi0_true",
        "info_rmse_beta",
        "info_rmse_logitnormal",
        "info_rmse_ratio",
        "pi0_rmse_beta",
        "pi0_rmse_logitnormal",
        "pi0_rmse_ratio",
        "zero_denominator",
    ])?;
    let info_rows = rmse_ratio(study, Target::Informativeness);
    let rate_rows = rmse_ratio(study, Target::MeanRate);
    for (i_row, p_row) in info_rows.iter().zip(&rate_rows) {
        wtr.write_record([
            &i_row.cell.regions.to_string(),
            &fmt_sig12(i_row.cell.a),
            &fmt_sig12(i_row.cell.pi0),
            &fmt_sig12(i_row.rmse_beta),
            &fmt_sig12(i_row.rmse_logitnormal),
            &fmt_sig12(i_row.ratio),
            &fmt_sig12(p_row.rmse_beta),
            &fmt_sig12(p_row.rmse_logitnormal),
            &fmt_sig12(p_row.ratio),
            &(if i_row.zero_denominator || p_row.zero_denominator { "true" } else { "false" })
                .to_string(),
        ])?;
    }
    wtr.flush()?;

    let meta_path = write_metadata(dir, meta)?;
    Ok(vec![rep_path, cell_path, meta_path])
}

pub fn write_metadata(dir: &Path, meta: &OutputMetadata) -> Result<PathBuf, DataError> {
    let (path, file) = create(dir, "metadata.txt")?;
    let mut buf = std::io::BufWriter::new(file);
    meta.write(&mut buf)?;
    buf.flush()?;
    Ok(path)
}

/// Text rendering of an informativeness summary, shared by the CLI.
pub fn format_informativeness(name: &str, s: &InformativenessSummary) -> String {
    format!(
        "{name}: mean {} median {} 95% interval ({}, {})",
        fmt_sig12(s.mean),
        fmt_sig12(s.median),
        fmt_sig12(s.q2_5),
        fmt_sig12(s.q97_5)
    )
}
