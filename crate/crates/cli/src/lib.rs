//! Batch front-end for `bellman-grid`: one JSON-configured experiment per run,
//! written to an output directory as a JSON report, CSV tables and a manifest.

pub mod config;
pub mod report;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{Experiment, ExperimentConfig, ProblemSpec, TauRule};
pub use report::{emit_report, read_report, Report, Results, RunStatus, SCHEMA_VERSION};
pub use run::{run, run_config};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("assumption failed: {0}")]
    Assumption(String),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Run(_) => 1,
            CliError::Assumption(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }
}

/// Command-line overrides of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// What a completed run wrote.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: RunStatus,
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Ok => 0,
            RunStatus::AssumptionsUnmet => 2,
        }
    }
}
