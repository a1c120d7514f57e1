use serde::{Deserialize, Serialize};

use crate::distributions::{
    discretize, sample, wasserstein1_auto, DistributionModel, EmpiricalDistribution, RadiusSchedule,
};
use crate::error::{invalid, Result};
use crate::seed::derive;

/// Cells per axis of the truth discretization in [`coverage_check`].
pub const COVERAGE_RESOLUTION: usize = 2000;
/// Largest transport LP (atoms × cells) attempted outside one dimension.
const LP_CELLS_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub n: usize,
    pub epsilon: f64,
    pub beta: f64,
    /// Fraction of trials with `W1(P̂_N, truth) ≤ ε_N`.
    pub coverage: f64,
    /// `1 − β_N`.
    pub target: f64,
}

/// Empirical frequency of the truth lying in the radius-`ε_N` ball around
/// `N` fresh samples, against a [`COVERAGE_RESOLUTION`]-cell discretization.
pub fn coverage_check(
    truth: &DistributionModel,
    schedule: &RadiusSchedule,
    n_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    coverage_check_with(truth, schedule, n_values, trials, seed, COVERAGE_RESOLUTION)
}

/// Trial `k` at sample size `N` draws from `derive(derive(seed, N), k)`.
pub fn coverage_check_with(
    truth: &DistributionModel,
    schedule: &RadiusSchedule,
    n_values: &[usize],
    trials: usize,
    seed: u64,
    resolution: usize,
) -> Result<Vec<CoverageRow>> {
    schedule.validate()?;
    if trials == 0 {
        return Err(invalid("coverage check needs at least one trial"));
    }
    let reference = discretize(truth, resolution)?;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n == 0 {
            return Err(invalid("sample sizes must be positive"));
        }
        if truth.dim() > 1 && n * reference.len() > LP_CELLS_LIMIT {
            return Err(invalid(format!(
                "transport LP with {n} atoms against {} cells is too large; lower the resolution",
                reference.len()
            )));
        }
        let (epsilon, beta) = schedule.radius(n as u64);
        let base = derive(seed, n as u64);
        let mut hits = 0usize;
        for k in 0..trials {
            let pts = sample(truth, n, derive(base, k as u64))?;
            let emp = EmpiricalDistribution::uniform(pts)?;
            if wasserstein1_auto(&emp, &reference)? <= epsilon {
                hits += 1;
            }
        }
        rows.push(CoverageRow {
            n,
            epsilon,
            beta,
            coverage: hits as f64 / trials as f64,
            target: 1.0 - beta,
        });
    }
    Ok(rows)
}
