//! Grid search with local refinement for the chance-constrained programs.
//!
//! Accuracy contract: the returned point is the best feasible point of the
//! final grid, so for a Lipschitz objective the value is within one final
//! cell's objective variation of the best value on the searched region. It is
//! not a global optimality certificate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{interior_warning, Diagnostics, GridDiagnostics, SolveResult, SolveStatus};
use crate::chance::{worst_case_prob_safe, SafeSetQuery};
use crate::distributions::{AmbiguitySet, EmpiricalDistribution};
use crate::error::{check_len, invalid, Result};
use crate::numeric::dot;
use crate::problem::ProblemSpec;

/// Slack on `P ≥ 1 − α` so that exact hits are not lost to rounding.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Points per coordinate on the first pass over the hull of X.
    pub initial_resolution: usize,
    /// Points per coordinate in each refinement window.
    pub refine_resolution: usize,
    pub rounds: usize,
}

impl GridConfig {
    /// 101 points per axis in 1-D, coarser in higher dimensions; 3 rounds of
    /// 21-point windows.
    pub fn for_dimension(n: usize) -> Self {
        let initial_resolution = match n {
            0 | 1 => 101,
            2 => 41,
            _ => 15,
        };
        Self {
            initial_resolution,
            refine_resolution: 21,
            rounds: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_resolution < 2 || self.refine_resolution < 2 {
            return Err(invalid("grid resolutions must be at least 2"));
        }
        Ok(())
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    count: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, resolution: usize) -> Self {
        let count = if hi > lo { resolution } else { 1 };
        Self { lo, hi, count }
    }

    fn step(&self) -> f64 {
        if self.count > 1 {
            (self.hi - self.lo) / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    fn at(&self, k: usize) -> f64 {
        if k + 1 == self.count && self.count > 1 {
            self.hi
        } else {
            self.lo + k as f64 * self.step()
        }
    }
}

/// Grid points in lexicographic order (first coordinate slowest).
fn points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(|a| a.count).product();
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; axes.len()];
            for (j, axis) in axes.iter().enumerate().rev() {
                p[j] = axis.at(idx % axis.count);
                idx /= axis.count;
            }
            p
        })
        .collect()
}

fn better(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-12 * (1.0 + incumbent.abs())
}

/// `min c·x` over `x ∈ X` with `inf_{Q ∈ ball} Q(F(x, ξ) ≤ 0) ≥ 1 − α`.
pub fn solve_drccp(problem: &ProblemSpec, ambiguity: &AmbiguitySet, search: &GridConfig) -> Result<SolveResult> {
    search.validate()?;
    let n = problem.n();
    if n > 3 {
        return Err(invalid(format!(
            "grid search supports at most 3 decision variables, got {n}"
        )));
    }
    check_len("distribution dimension", problem.m(), ambiguity.center().dim())?;
    ambiguity.center().check_support(&problem.support)?;
    let (hull_lo, hull_hi) = problem.decision_hull()?;
    let level = 1.0 - problem.alpha - PROB_TOL;

    let mut axes: Vec<Axis> = (0..n)
        .map(|j| Axis::new(hull_lo[j], hull_hi[j], search.initial_resolution))
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut evaluated = 0;
    let mut iterations = 0;
    for round in 0..=search.rounds {
        if round > 0 {
            let Some((_, center)) = &best else { break };
            axes = (0..n)
                .map(|j| {
                    let s = axes[j].step();
                    let lo = (center[j] - s).max(hull_lo[j]);
                    let hi = (center[j] + s).min(hull_hi[j]);
                    Axis::new(lo, hi, search.refine_resolution)
                })
                .collect();
        }
        let candidates: Vec<Vec<f64>> = points(&axes)
            .into_iter()
            .filter(|x| problem.decision_violation(x) <= 1e-9)
            .collect();
        evaluated += candidates.len();
        iterations += 1;
        let feasible: Vec<bool> = candidates
            .par_iter()
            .map(|x| -> Result<bool> {
                let query = SafeSetQuery::new(problem, x)?;
                Ok(worst_case_prob_safe(&query, ambiguity)? >= level)
            })
            .collect::<Result<Vec<bool>>>()?;
        for (x, ok) in candidates.into_iter().zip(feasible) {
            if !ok {
                continue;
            }
            let v = dot(&problem.objective, &x);
            let replace = match &best {
                None => true,
                Some((bv, _)) => better(v, *bv),
            };
            if replace {
                best = Some((v, x));
            }
        }
    }
    let mut diagnostics = Diagnostics {
        method: if ambiguity.radius() == 0.0 {
            "ccp/grid"
        } else {
            "drccp/grid"
        }
        .to_string(),
        iterations,
        grid: Some(GridDiagnostics {
            initial_resolution: search.initial_resolution,
            refine_resolution: search.refine_resolution,
            rounds: search.rounds,
            final_step: axes.iter().map(Axis::step).collect(),
            points_evaluated: evaluated,
        }),
        ..Default::default()
    };
    diagnostics.warnings.extend(interior_warning(problem));
    match best {
        Some((value, x)) => Ok(SolveResult {
            status: SolveStatus::Optimal,
            value,
            x,
            t: None,
            diagnostics,
        }),
        None => {
            diagnostics
                .warnings
                .push("no grid point satisfies the chance constraint; a finer grid might still find one".into());
            Ok(SolveResult::failed(SolveStatus::Infeasible, diagnostics))
        }
    }
}

/// [`solve_drccp`] with the safe probability taken under `reference`.
pub fn solve_ccp_reference(
    problem: &ProblemSpec,
    reference: &EmpiricalDistribution,
    search: &GridConfig,
) -> Result<SolveResult> {
    solve_drccp(problem, &AmbiguitySet::singleton(reference.clone()), search)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoints(n: usize) -> EmpiricalDistribution {
        EmpiricalDistribution::uniform((0..n).map(|k| vec![2.0 * (k as f64 + 0.5) / n as f64]).collect()).unwrap()
    }

    #[test]
    fn lexicographic_points() {
        let axes = [Axis::new(0.0, 1.0, 2), Axis::new(5.0, 5.0, 7), Axis::new(0.0, 2.0, 3)];
        let pts = points(&axes);
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![0.0, 5.0, 0.0]);
        assert_eq!(pts[1], vec![0.0, 5.0, 1.0]);
        assert_eq!(pts[5], vec![1.0, 5.0, 2.0]);
    }

    #[test]
    fn scalar_chance_solution() {
        let p = ProblemSpec::scalar_budget(0.1).unwrap();
        let r = solve_ccp_reference(&p, &midpoints(1000), &GridConfig::for_dimension(1)).unwrap();
        assert!(r.is_optimal());
        // 900 of 1000 midpoints must satisfy ξ ≤ 1/x: x ≤ 1/1.799
        assert!((r.value + 1.0 / 1.799).abs() < 2e-4, "{}", r.value);
        assert!(r.diagnostics.grid.as_ref().unwrap().final_step[0] < 1e-3);
    }

    #[test]
    fn all_safe_reference_hits_vertex() {
        let p = ProblemSpec::scalar_budget(0.1).unwrap();
        let r = solve_ccp_reference(
            &p,
            &EmpiricalDistribution::dirac(vec![0.0]).unwrap(),
            &GridConfig::for_dimension(1),
        )
        .unwrap();
        assert_eq!(r.x, vec![10.0]);
    }

    #[test]
    fn infeasible_grid() {
        let mut p = ProblemSpec::scalar_budget(0.1).unwrap();
        p.decision_set.lower = vec![5.0];
        let r = solve_ccp_reference(
            &p,
            &EmpiricalDistribution::dirac(vec![1.0]).unwrap(),
            &GridConfig::for_dimension(1),
        )
        .unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }
}
