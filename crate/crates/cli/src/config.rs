//! Experiment configuration, read from a single JSON file.

use std::path::{Path, PathBuf};

use bellman_grid::decomp2d::SmoothAbs;
use bellman_grid::estimates::Theorem;
use bellman_grid::problem::{Assumption, Constants};
use bellman_grid::solver::SolveConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Seeds every randomized sampling of the run.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub experiment: Experiment,
}

/// A catalog entry by name, or coefficients tabulated on the base lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemSpec {
    Catalog(String),
    Tabulated(TabulatedSpec),
}

/// Coefficient tables `r.csv`, `a.csv`, `b.csv`, `c.csv`, `f.csv` in `dir`,
/// a box `lo..=hi` in base-step units and data as a grid-function CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedSpec {
    pub dir: PathBuf,
    pub controls: usize,
    pub ells: Vec<Vec<i64>>,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub data: PathBuf,
    #[serde(default)]
    pub constants: Option<Constants<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauRule {
    /// `τ` fixed along the ladder.
    Fixed(f64),
    /// `τ = ratio · h`.
    Proportional(f64),
}

impl TauRule {
    pub fn at(self, h: f64) -> f64 {
        match self {
            TauRule::Fixed(tau) => tau,
            TauRule::Proportional(ratio) => ratio * h,
        }
    }
}

fn default_samples() -> usize {
    200
}

fn default_trials() -> usize {
    100
}

fn default_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_ms() -> Vec<f64> {
    vec![-1.0, 0.0, 1.5]
}

fn default_taus() -> Vec<f64> {
    vec![0.1, 0.37]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Solve {
        problem: ProblemSpec,
        h: f64,
        tau: f64,
        #[serde(default)]
        solver: SolveConfig<f64>,
    },
    VerifyIdentities {
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_dims")]
        dims: Vec<usize>,
        #[serde(default = "default_ms")]
        ms: Vec<f64>,
        #[serde(default = "default_taus")]
        taus: Vec<f64>,
    },
    ValidateAssumptions {
        problem: ProblemSpec,
        h: f64,
        tau: f64,
        /// Defaults to every assumption.
        #[serde(default)]
        assumptions: Option<Vec<Assumption>>,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    EstimateStudy {
        problem: String,
        theorem: Theorem,
        ladder: Vec<f64>,
        tau: f64,
        #[serde(default)]
        solver: SolveConfig<f64>,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default)]
        lambda_margin: f64,
    },
    Convergence {
        problem: String,
        ladder: Vec<f64>,
        tau: TauRule,
        #[serde(default)]
        solver: SolveConfig<f64>,
    },
    Decompose {
        /// CSV with rows `coords.., a11, a12, a22`.
        #[serde(default)]
        input: Option<PathBuf>,
        /// Inline rows in the same layout.
        #[serde(default)]
        rows: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        psi: SmoothAbs,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Solve { .. } => "solve",
            Experiment::VerifyIdentities { .. } => "verify-identities",
            Experiment::ValidateAssumptions { .. } => "validate-assumptions",
            Experiment::EstimateStudy { .. } => "estimate-study",
            Experiment::Convergence { .. } => "convergence",
            Experiment::Decompose { .. } => "decompose",
        }
    }
}

impl ExperimentConfig {
    /// Parses `text`; relative paths inside are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.experiment {
            Experiment::Solve { problem: ProblemSpec::Tabulated(t), .. }
            | Experiment::ValidateAssumptions { problem: ProblemSpec::Tabulated(t), .. } => {
                resolve(&mut t.dir);
                resolve(&mut t.data);
            }
            Experiment::Decompose { input: Some(p), .. } => resolve(p),
            _ => {}
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        match &self.experiment {
            Experiment::Solve { h, tau, .. } | Experiment::ValidateAssumptions { h, tau, .. } => {
                if !(*h > 0.0 && *tau > 0.0) {
                    return bad("`h` and `tau` must be positive");
                }
            }
            Experiment::EstimateStudy { ladder, tau, .. } => {
                if ladder.len() < 2 {
                    return bad("`ladder` needs at least two mesh sizes");
                }
                if *tau <= 0.0 {
                    return bad("`tau` must be positive");
                }
            }
            Experiment::Convergence { ladder, .. } => {
                if ladder.len() < 3 {
                    return bad("`ladder` needs at least three mesh sizes");
                }
            }
            Experiment::Decompose { input, rows, .. } => {
                if input.is_some() == rows.is_some() {
                    return bad("decompose needs exactly one of `input` and `rows`");
                }
            }
            Experiment::VerifyIdentities { dims, .. } => {
                if dims.iter().any(|d| !(1..=3).contains(d)) {
                    return bad("`dims` entries must be 1, 2 or 3");
                }
            }
        }
        Ok(())
    }
}
