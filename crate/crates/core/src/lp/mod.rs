//! Dense linear programming.
//!
//! [`solve_lp`] is a two-phase, bounded-variable primal simplex working on a
//! dense tableau. Pricing is Dantzig's rule until a run of degenerate pivots
//! trips a counter, after which the phase finishes under Bland's rule. All tie
//! breaking is by column/row index, so identical inputs give identical output.
//!
//! [`solve_transport`] builds the discrete optimal-transport LP on top of it.

mod simplex;
mod transport;

pub use transport::{solve_transport, TransportPlan};

use crate::error::{check_len, invalid, Result};

/// Primal feasibility tolerance shared by every module.
pub const FEASIBILITY_TOL: f64 = 1e-8;
/// Reduced-cost optimality tolerance shared by every module.
pub const OPTIMALITY_TOL: f64 = 1e-9;

/// `minimize objective·x` subject to
/// `inequality_lhs·x ≤ inequality_rhs`, `equality_lhs·x = equality_rhs`,
/// `lower_bounds ≤ x ≤ upper_bounds`. Bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub inequality_lhs: Vec<Vec<f64>>,
    pub inequality_rhs: Vec<f64>,
    pub equality_lhs: Vec<Vec<f64>>,
    pub equality_rhs: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap hit or the final point failed the feasibility audit.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LinearProgram {
    /// A program with no constraints and default bounds `0 ≤ x < ∞`.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            inequality_lhs: Vec::new(),
            inequality_rhs: Vec::new(),
            equality_lhs: Vec::new(),
            equality_rhs: Vec::new(),
            lower_bounds: vec![0.0; n],
            upper_bounds: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower_bounds = lower;
        self.upper_bounds = upper;
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower_bounds[var] = lower;
        self.upper_bounds[var] = upper;
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        self.inequality_lhs.push(row);
        self.inequality_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.inequality_lhs.push(row.into_iter().map(|a| -a).collect());
        self.inequality_rhs.push(-rhs);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.equality_lhs.push(row);
        self.equality_rhs.push(rhs);
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        check_len("inequality_rhs", self.inequality_lhs.len(), self.inequality_rhs.len())?;
        check_len("equality_rhs", self.equality_lhs.len(), self.equality_rhs.len())?;
        check_len("lower_bounds", n, self.lower_bounds.len())?;
        check_len("upper_bounds", n, self.upper_bounds.len())?;
        for row in self.inequality_lhs.iter().chain(&self.equality_lhs) {
            check_len("constraint row", n, row.len())?;
            if row.iter().any(|a| !a.is_finite()) {
                return Err(invalid("constraint coefficients must be finite"));
            }
        }
        if self
            .objective
            .iter()
            .chain(&self.inequality_rhs)
            .chain(&self.equality_rhs)
            .any(|v| !v.is_finite())
        {
            return Err(invalid("objective and right-hand sides must be finite"));
        }
        for (j, (&lo, &hi)) in self.lower_bounds.iter().zip(&self.upper_bounds).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(invalid(format!(
                    "bounds of variable {j} are inconsistent: [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Largest constraint or bound violation of `point`, each row scaled by
    /// `1 + |rhs| + Σ|a_j x_j|`.
    pub fn scaled_violation(&self, point: &[f64]) -> f64 {
        let row_violation = |row: &[f64], rhs: f64| {
            let (dot, mag) = row
                .iter()
                .zip(point)
                .fold((0.0, 0.0), |(d, m), (a, x)| (d + a * x, m + (a * x).abs()));
            (dot - rhs, 1.0 + rhs.abs() + mag)
        };
        let mut worst: f64 = 0.0;
        for (row, &rhs) in self.inequality_lhs.iter().zip(&self.inequality_rhs) {
            let (r, s) = row_violation(row, rhs);
            worst = worst.max(r / s);
        }
        for (row, &rhs) in self.equality_lhs.iter().zip(&self.equality_rhs) {
            let (r, s) = row_violation(row, rhs);
            worst = worst.max(r.abs() / s);
        }
        for ((&x, &lo), &hi) in point.iter().zip(&self.lower_bounds).zip(&self.upper_bounds) {
            worst = worst.max((lo - x) / (1.0 + lo.abs())).max((x - hi) / (1.0 + hi.abs()));
        }
        worst
    }
}

/// Solves `lp`. Validation problems are errors; infeasibility, unboundedness
/// and numerical trouble are reported through [`LpStatus`].
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    Ok(simplex::solve(lp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_active_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_ge(vec![1.0], 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!((sol.point[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_corner() {
        // vertices (0,0), (1,0), (0,1): objective values 0, -1, -1
        let mut lp = LinearProgram::new(vec![-1.0, -1.0]);
        lp.add_le(vec![1.0, 1.0], 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value + 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_feasible_set() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_le(vec![1.0], -1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.add_le(vec![1.0, -1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_reflected_variables() {
        // min x - y, x free with x >= -3 coming from a row, y <= 2 with no lower bound
        let mut lp = LinearProgram::new(vec![1.0, -1.0])
            .with_bounds(vec![f64::NEG_INFINITY, f64::NEG_INFINITY], vec![f64::INFINITY, 2.0]);
        lp.add_ge(vec![1.0, 0.0], -3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value + 5.0).abs() < 1e-12);
        assert!((sol.point[0] + 3.0).abs() < 1e-12 && (sol.point[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_with_redundant_rows() {
        let mut lp = LinearProgram::new(vec![1.0, 2.0, 3.0]);
        lp.add_eq(vec![1.0, 1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0, 2.0], 2.0);
        lp.add_ge(vec![0.0, 0.0, 1.0], 0.25);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - (0.75 + 0.75)).abs() < 1e-12);
    }

    #[test]
    fn fixed_variable_is_respected() {
        let lp = LinearProgram::new(vec![-1.0, -1.0]).with_bounds(vec![0.5, 0.0], vec![0.5, 3.0]);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.point, vec![0.5, 3.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add_le(vec![1.0], 1.0);
        assert!(solve_lp(&lp).is_err());
        let lp = LinearProgram::new(vec![1.0]).with_bounds(vec![2.0], vec![1.0]);
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn deterministic_on_degenerate_input() {
        // Klee-Minty-like degenerate stack: many rows active at the origin.
        let mut lp = LinearProgram::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.status, LpStatus::Optimal);
        // Beale's cycling example: optimum -0.05 at (0.04, 0, 1, 0)
        assert!((a.value + 0.05).abs() < 1e-9, "value {}", a.value);
    }
}
