//! Report schema and its on-disk form.
//!
//! Every run writes `report.json` and `manifest.json`; rate tables go to
//! `rates.csv` with header `h,error,lhs,rhs,ratio`, solutions to
//! `solution.csv` and decompositions to `decomposed.csv`.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use bellman_grid::calculus::ProductRuleResiduals;
use bellman_grid::decomp2d::DirectionalCoeffs;
use bellman_grid::estimates::{EstimateReport, RateTable, Theorem};
use bellman_grid::problem::ValidationReport;
use bellman_grid::solver::LevelStats;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    AssumptionsUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: String,
    pub seed: u64,
    pub status: RunStatus,
    pub results: Results,
    /// Rate tables, also written as CSV.
    pub tables: Vec<RateTable<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCase {
    pub dim: usize,
    pub nu: f64,
    pub kinked: bool,
    pub product_rules: ProductRuleResiduals<f64>,
    pub laplace_bound_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedCase {
    pub h: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugationCase {
    pub m: f64,
    pub tau: f64,
    /// Largest residual over the levels below the horizon, divided by
    /// `1 + max ξ · max|u| / τ`.
    pub scaled_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Results {
    Solve {
        problem: String,
        h: f64,
        tau: f64,
        unknowns: usize,
        levels: Vec<LevelStats<f64>>,
        max_residual: f64,
        monotone: bool,
        /// Sup-norm distance to the entry's exact solution, when it has one.
        sup_error: Option<f64>,
    },
    VerifyIdentities {
        cases: Vec<IdentityCase>,
        mixed: Vec<MixedCase>,
        conjugation: Vec<ConjugationCase>,
    },
    ValidateAssumptions {
        validation: ValidationReport<f64>,
    },
    EstimateStudy {
        problem: String,
        theorem: Theorem,
        reports: Vec<EstimateReport<f64>>,
    },
    Convergence {
        problem: String,
    },
    Decompose {
        points: Vec<Vec<f64>>,
        coefficients: Vec<DirectionalCoeffs<f64>>,
        max_reconstruction_error: f64,
        min_coefficient: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_sha256: String,
    pub versions: Versions,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub bellman_grid: String,
    pub bellman_grid_cli: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes one CSV of all tables, rows in table order.
pub fn write_rates(path: &Path, tables: &[RateTable<f64>]) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    out.write_record(["h", "error", "lhs", "rhs", "ratio"]).map_err(csv_err)?;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for table in tables {
        for row in &table.rows {
            out.write_record([row.h.to_string(), cell(row.error), cell(row.lhs), cell(row.rhs), cell(row.ratio)])
                .map_err(csv_err)?;
        }
    }
    out.flush().map_err(io_err(path))
}

/// Writes `report.json`, `rates.csv` when there are tables, and the manifest.
/// `extra` lists files the run already wrote into `dir`.
pub fn emit_report(dir: &Path, report: &Report, config_text: &str, extra: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
    write_json(&dir.join("report.json"), report)?;
    files.push("report.json".into());
    if !report.tables.is_empty() {
        write_rates(&dir.join("rates.csv"), &report.tables)?;
        files.push("rates.csv".into());
    }
    files.sort();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_sha256: sha256_hex(config_text.as_bytes()),
        versions: Versions {
            bellman_grid: bellman_grid::VERSION.to_string(),
            bellman_grid_cli: env!("CARGO_PKG_VERSION").to_string(),
        },
        files: files.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    files.push("manifest.json".into());
    Ok(files.iter().map(|f| dir.join(f)).collect())
}

pub fn read_report(path: &Path) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Creates `dir/name` for writing.
pub fn create(dir: &Path, name: &str) -> Result<impl Write, CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    File::create(&path).map_err(io_err(&path))
}
