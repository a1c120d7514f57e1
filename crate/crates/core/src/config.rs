//! TOML files for problems and experiments.
//!
//! A problem file (schema version 1):
//!
//! ```toml
//! schema_version = 1
//! objective = [-1.0]
//! alpha = 0.1
//!
//! [decision_set]
//! lower = [0.0]
//! upper = [10.0]
//! # rows of G x <= h
//! constraints = [{ coeffs = [-1.0], rhs = -5.0 }]
//!
//! [support]
//! lower = [0.0]
//! upper = [2.0]
//!
//! # F(x, ξ) = max_k (u_k + U_k x)·ξ + w_k·x + s_k
//! [[pieces]]
//! xi_matrix = [[1.0]]   # U_k, m rows of n entries
//! xi_offset = [0.0]     # u_k
//! x_coeffs = [0.0]      # w_k
//! constant = -1.0       # s_k
//! ```
//!
//! An experiment file has the same problem under `[problem]`, plus the truth
//! model, schedule, sample sizes and thresholds; see [`ExperimentConfig`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::consistency::ExperimentConfig;
use crate::distributions::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::problem::{BiAffinePiece, DecisionSet, ProblemSpec};
use crate::support::BoxSet;

pub const PROBLEM_SCHEMA_VERSION: u32 = 1;

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    #[serde(default = "one")]
    schema_version: u32,
    objective: Vec<f64>,
    alpha: f64,
    decision_set: DecisionSet,
    support: BoxSet,
    pieces: Vec<BiAffinePiece>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn parse_problem(text: &str, origin: &str) -> Result<ProblemSpec> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    if file.schema_version != PROBLEM_SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "{origin}: unsupported problem schema version {} (expected {PROBLEM_SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    ProblemSpec::new(file.objective, file.decision_set, file.pieces, file.alpha, file.support)
        .map_err(|e| Error::Config(format!("{origin}: {e}")))
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    parse_problem(&read(path)?, &path.display().to_string())
}

pub fn problem_to_toml(problem: &ProblemSpec) -> Result<String> {
    let file = ProblemFile {
        schema_version: PROBLEM_SCHEMA_VERSION,
        objective: problem.objective.clone(),
        alpha: problem.alpha,
        decision_set: problem.decision_set.clone(),
        support: problem.support.clone(),
        pieces: problem.pieces.clone(),
    };
    toml::to_string(&file).map_err(|e| Error::Config(e.to_string()))
}

pub fn parse_experiment(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    config.validate().map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    Ok(config)
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig> {
    parse_experiment(&read(path)?, &path.display().to_string())
}

pub fn experiment_to_toml(config: &ExperimentConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Config(e.to_string()))
}

/// Reads a `w, xi_1..xi_m` CSV, naming the file in errors.
pub fn load_distribution(path: &Path) -> Result<EmpiricalDistribution> {
    let file = std::fs::File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    EmpiricalDistribution::read_csv(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
