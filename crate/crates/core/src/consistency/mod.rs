//! Sample-path experiments: nested samples from a known truth, radius
//! schedules, repeated solves and the aggregate checks on the resulting
//! value and decision sequences.

mod analyze;
mod coverage;
mod traces;

pub use analyze::{
    analyze, analyze_experiment, reference_solution, uniform_gap, ConsistencyReport, GapEstimate, GapGrid, NStats,
    ReferenceSolution, Verdicts,
};
pub use coverage::{coverage_check, coverage_check_with, CoverageRow, COVERAGE_RESOLUTION};
pub use traces::{read_traces_csv, write_aggregates_csv, write_traces_csv};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chance::{empirical_prob_safe, SafeSetQuery};
use crate::distributions::{
    discretize, sample, AmbiguitySet, DistributionModel, EmpiricalDistribution, RadiusSchedule,
};
use crate::error::{check_len, invalid, Result};
use crate::problem::ProblemSpec;
use crate::risk::{cvar_alpha, ScalarSample};
use crate::seed::derive;
use crate::solvers::{solve_drccp, solve_drrcp, GridConfig, SolveResult, SolveStatus};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Drrcp,
    Drccp,
    Both,
}

impl ExperimentMode {
    /// The single-program modes this mode runs.
    pub fn programs(self) -> Vec<ExperimentMode> {
        match self {
            Self::Both => vec![Self::Drrcp, Self::Drccp],
            m => vec![m],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Drrcp => "drrcp",
            Self::Drccp => "drccp",
            Self::Both => "both",
        }
    }
}

/// Known optimal value and optimizer set of the true-distribution program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticReference {
    pub j_star: f64,
    #[serde(default)]
    pub x_star: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct References {
    #[serde(default)]
    pub drrcp: Option<AnalyticReference>,
    #[serde(default)]
    pub drccp: Option<AnalyticReference>,
}

/// Verdict thresholds. Unset optional thresholds produce no verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Slack in `J_N ≥ J* − value_tol`.
    pub value_tol: f64,
    /// Required fraction of paths above `J* − value_tol`.
    pub min_fraction: f64,
    /// First N the fraction check applies to; defaults to the second-smallest N.
    pub from_n: Option<usize>,
    /// N at which every path must be above.
    pub all_paths_at: Option<usize>,
    /// Bound on the median `|J_N − J*|` at the largest N.
    pub value_error_max: Option<f64>,
    /// The median `|J_N − J*|` at the largest N must be below its value at
    /// this N by more than `value_tol`, so rounding jitter is not an
    /// improvement.
    pub improve_over: Option<usize>,
    /// Bound on the median decision distance at the largest N.
    pub x_error_max: Option<f64>,
    /// Allowed relative increase of the uniform gap between consecutive N.
    pub gap_slack: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            value_tol: 1e-9,
            min_fraction: 0.95,
            from_n: None,
            all_paths_at: None,
            value_error_max: None,
            improve_over: None,
            x_error_max: None,
            gap_slack: 0.1,
        }
    }
}

/// Uniform-gap estimation along one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub path: usize,
    /// Points per decision coordinate.
    pub x_points: usize,
    pub t_points: usize,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            path: 0,
            x_points: 11,
            t_points: 11,
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_resolution() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub truth: DistributionModel,
    #[serde(default)]
    pub schedule: RadiusSchedule,
    pub sample_sizes: Vec<usize>,
    pub paths: usize,
    pub base_seed: u64,
    pub mode: ExperimentMode,
    /// Cells per axis of the truth discretization used for margins and
    /// computed references.
    #[serde(default = "default_resolution")]
    pub reference_resolution: usize,
    #[serde(default)]
    pub reference: References,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub gap: Option<GapConfig>,
    /// Fill the `ms` column with wall time; off by default so that traces
    /// are byte-for-byte reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "unsupported experiment schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.problem.validate()?;
        self.truth.validate()?;
        self.schedule.validate()?;
        check_len("truth dimension", self.problem.m(), self.truth.dim())?;
        if self.truth.support != self.problem.support {
            return Err(invalid("truth support must equal the problem support"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes[0] == 0 {
            return Err(invalid("sample_sizes must be a nonempty list of positive sizes"));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("sample_sizes must be strictly increasing"));
        }
        if self.paths == 0 {
            return Err(invalid("paths must be at least 1"));
        }
        if self.reference_resolution < 2 {
            return Err(invalid("reference_resolution must be at least 2"));
        }
        if self.mode != ExperimentMode::Drrcp && self.problem.n() > 3 {
            return Err(invalid(
                "chance-constrained experiments support at most 3 decision variables",
            ));
        }
        self.grid_config().validate()?;
        if let Some(g) = &self.gap {
            if g.x_points == 0 || g.t_points == 0 || g.path >= self.paths {
                return Err(invalid("gap grid needs positive point counts and an existing path"));
            }
        }
        Ok(())
    }

    pub fn grid_config(&self) -> GridConfig {
        self.grid.unwrap_or_else(|| GridConfig::for_dimension(self.problem.n()))
    }

    pub fn max_n(&self) -> usize {
        *self.sample_sizes.last().unwrap_or(&0)
    }

    /// The nested sample of path `r`, drawn once at the largest N.
    pub fn path_samples(&self, r: usize) -> Result<Vec<Vec<f64>>> {
        sample(&self.truth, self.max_n(), derive(self.base_seed, r as u64))
    }

    /// Fine stand-in for the truth: the midpoint grid in dimension ≤ 2, a
    /// large fixed sample otherwise.
    pub fn truth_reference(&self) -> Result<EmpiricalDistribution> {
        if self.truth.dim() <= 2 {
            discretize(&self.truth, self.reference_resolution)
        } else {
            let pts = sample(&self.truth, self.reference_resolution, derive(self.base_seed, u64::MAX))?;
            EmpiricalDistribution::uniform(pts)
        }
    }
}

/// One `(path, N)` cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTrace {
    pub mode: ExperimentMode,
    pub path: usize,
    pub n: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub status: SolveStatus,
    pub value: f64,
    pub x: Vec<f64>,
    pub t: Option<f64>,
    /// True CVaR (risk mode) or true safe probability (chance mode) of `x`
    /// under the truth reference; NaN when no decision was returned.
    pub margin: f64,
    pub ms: f64,
}

impl ExperimentTrace {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub(crate) fn true_margin(
    mode: ExperimentMode,
    problem: &ProblemSpec,
    truth: &EmpiricalDistribution,
    x: &[f64],
) -> Result<f64> {
    match mode {
        ExperimentMode::Drccp => Ok(empirical_prob_safe(&SafeSetQuery::new(problem, x)?, truth)),
        _ => {
            let s = ScalarSample::pushforward(truth, |xi| problem.constraint_value(x, xi))?;
            cvar_alpha(&s, problem.alpha)
        }
    }
}

fn solve_cell(config: &ExperimentConfig, mode: ExperimentMode, ball: &AmbiguitySet) -> SolveResult {
    let solved = match mode {
        ExperimentMode::Drccp => solve_drccp(&config.problem, ball, &config.grid_config()),
        _ => solve_drrcp(&config.problem, ball),
    };
    solved.unwrap_or_else(|e| {
        let mut r = SolveResult::failed(SolveStatus::NumericalFailure, Default::default());
        r.diagnostics.warnings.push(e.to_string());
        r
    })
}

fn run_path(
    config: &ExperimentConfig,
    truth: &EmpiricalDistribution,
    mode: ExperimentMode,
    r: usize,
) -> Result<Vec<ExperimentTrace>> {
    let samples = config.path_samples(r)?;
    let mut out = Vec::with_capacity(config.sample_sizes.len());
    for &n in &config.sample_sizes {
        let (epsilon, beta) = config.schedule.radius(n as u64);
        let center = EmpiricalDistribution::uniform(samples[..n].to_vec())?;
        let ball = AmbiguitySet::new(center, epsilon)?;
        let start = Instant::now();
        let result = solve_cell(config, mode, &ball);
        let ms = if config.record_timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        let margin = if result.is_optimal() {
            true_margin(mode, &config.problem, truth, &result.x)?
        } else {
            f64::NAN
        };
        out.push(ExperimentTrace {
            mode,
            path: r,
            n,
            epsilon,
            beta,
            status: result.status,
            value: result.value,
            x: result.x,
            t: result.t,
            margin,
            ms,
        });
    }
    Ok(out)
}

/// Runs every `(program, path, N)` cell. Cells are independent and run in
/// parallel; the output is ordered by program, path and N, so it does not
/// depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentTrace>> {
    config.validate()?;
    let truth = config.truth_reference()?;
    let jobs: Vec<(ExperimentMode, usize)> = config
        .mode
        .programs()
        .into_iter()
        .flat_map(|m| (0..config.paths).map(move |r| (m, r)))
        .collect();
    let per_path = jobs
        .par_iter()
        .map(|&(mode, r)| run_path(config, &truth, mode, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_path.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::support::BoxSet;

    pub(crate) fn small_config(mode: ExperimentMode) -> ExperimentConfig {
        let support = BoxSet::interval(0.0, 2.0).unwrap();
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            problem: ProblemSpec::scalar_budget(0.1).unwrap(),
            truth: DistributionModel::uniform(support).unwrap(),
            schedule: RadiusSchedule::default(),
            sample_sizes: vec![10, 20, 40],
            paths: 3,
            base_seed: 11,
            mode,
            reference_resolution: 200,
            reference: References::default(),
            grid: None,
            thresholds: Thresholds::default(),
            gap: None,
            record_timing: false,
        }
    }

    #[test]
    fn one_row_per_cell() {
        let mut c = small_config(ExperimentMode::Drrcp);
        c.paths = 1;
        c.sample_sizes = vec![10];
        assert_eq!(run_experiment(&c).unwrap().len(), 1);
        let both = run_experiment(&small_config(ExperimentMode::Both)).unwrap();
        assert_eq!(both.len(), 2 * 3 * 3);
        assert!(both.iter().all(|t| t.is_optimal()));
    }

    #[test]
    fn deterministic_and_nested() {
        let c = small_config(ExperimentMode::Drrcp);
        assert_eq!(run_experiment(&c).unwrap(), run_experiment(&c).unwrap());
        let s = c.path_samples(1).unwrap();
        let mut longer = c.clone();
        longer.sample_sizes = vec![10, 20, 80];
        assert_eq!(&longer.path_samples(1).unwrap()[..40], &s[..]);
    }

    #[test]
    fn validation() {
        let mut c = small_config(ExperimentMode::Drrcp);
        c.sample_sizes = vec![20, 10];
        assert!(c.validate().is_err());
        let mut c = small_config(ExperimentMode::Drrcp);
        c.paths = 0;
        assert!(c.validate().is_err());
        let mut c = small_config(ExperimentMode::Drrcp);
        c.schema_version = 7;
        assert!(c.validate().is_err());
    }
}
