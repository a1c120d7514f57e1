//! Problem data shared by the risk, chance and solver modules.
//!
//! The constraint function is a maximum of bi-affine pieces,
//! `F(x, ξ) = max_k [(u_k + U_k x)·ξ + w_k·x + s_k]`, convex in `x` for fixed
//! `ξ` and bounded on the box Ξ for every `x` in the compact polyhedron X.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::numeric::dot;
use crate::support::BoxSet;

/// Tolerance for `x ∈ X` membership checks.
pub const DECISION_TOL: f64 = 1e-7;

/// `coeffs·x ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConstraint {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

/// `X = {x : lower ≤ x ≤ upper, Gx ≤ h}` with finite bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub constraints: Vec<LinearConstraint>,
}

/// One piece `(u + U x)·ξ + w·x + s` of the constraint function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiAffinePiece {
    /// `U`, an `m × n` matrix.
    pub xi_matrix: Vec<Vec<f64>>,
    /// `u`, length `m`.
    pub xi_offset: Vec<f64>,
    /// `w`, length `n`.
    pub x_coeffs: Vec<f64>,
    /// `s`.
    pub constant: f64,
}

impl BiAffinePiece {
    /// `∇_ξ` of the piece at `x`: `u + U x`.
    pub fn xi_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.xi_offset
            .iter()
            .zip(&self.xi_matrix)
            .map(|(u, row)| u + dot(row, x))
            .collect()
    }

    /// The ξ-free part at `x`: `w·x + s`.
    pub fn offset(&self, x: &[f64]) -> f64 {
        dot(&self.x_coeffs, x) + self.constant
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        dot(&self.xi_gradient(x), xi) + self.offset(x)
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            xi_matrix: self
                .xi_matrix
                .iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect(),
            xi_offset: self.xi_offset.iter().map(|v| v * factor).collect(),
            x_coeffs: self.x_coeffs.iter().map(|v| v * factor).collect(),
            constant: self.constant * factor,
        }
    }
}

/// `minimize c·x` over `x ∈ X` subject to a risk or chance constraint on
/// `F(x, ξ)`, `ξ ∈ Ξ`, at level `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub objective: Vec<f64>,
    pub decision_set: DecisionSet,
    pub pieces: Vec<BiAffinePiece>,
    pub alpha: f64,
    pub support: BoxSet,
}

impl ProblemSpec {
    pub fn new(
        objective: Vec<f64>,
        decision_set: DecisionSet,
        pieces: Vec<BiAffinePiece>,
        alpha: f64,
        support: BoxSet,
    ) -> Result<Self> {
        let p = Self {
            objective,
            decision_set,
            pieces,
            alpha,
            support,
        };
        p.validate()?;
        Ok(p)
    }

    /// The scalar instance used throughout the tests and examples:
    /// `c = −1`, `X = [0, 10]`, `F(x, ξ) = xξ − 1`, `Ξ = [0, 2]`.
    pub fn scalar_budget(alpha: f64) -> Result<Self> {
        Self::new(
            vec![-1.0],
            DecisionSet {
                lower: vec![0.0],
                upper: vec![10.0],
                constraints: Vec::new(),
            },
            vec![BiAffinePiece {
                xi_matrix: vec![vec![1.0]],
                xi_offset: vec![0.0],
                x_coeffs: vec![0.0],
                constant: -1.0,
            }],
            alpha,
            BoxSet::interval(0.0, 2.0)?,
        )
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut p = self.clone();
        p.alpha = alpha;
        p.validate()?;
        Ok(p)
    }

    /// Number of decision variables `n`.
    pub fn n(&self) -> usize {
        self.objective.len()
    }

    /// Dimension `m` of the uncertainty.
    pub fn m(&self) -> usize {
        self.support.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(invalid("problem needs at least one decision variable"));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(invalid("objective coefficients must be finite"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        self.support.validate()?;
        let m = self.m();
        let ds = &self.decision_set;
        check_len("decision lower bounds", n, ds.lower.len())?;
        check_len("decision upper bounds", n, ds.upper.len())?;
        for (j, (lo, hi)) in ds.lower.iter().zip(&ds.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!(
                    "decision variable {j} needs finite bounds (X must be compact)"
                )));
            }
            if lo > hi {
                return Err(invalid(format!(
                    "decision variable {j} has lower bound above upper bound"
                )));
            }
        }
        for c in &ds.constraints {
            check_len("decision constraint", n, c.coeffs.len())?;
            if c.coeffs.iter().any(|v| !v.is_finite()) || !c.rhs.is_finite() {
                return Err(invalid("decision constraints must be finite"));
            }
        }
        if self.pieces.is_empty() {
            return Err(invalid("constraint function needs at least one piece"));
        }
        for (k, piece) in self.pieces.iter().enumerate() {
            check_len("piece xi_matrix rows", m, piece.xi_matrix.len())?;
            check_len("piece xi_offset", m, piece.xi_offset.len())?;
            check_len("piece x_coeffs", n, piece.x_coeffs.len())?;
            for row in &piece.xi_matrix {
                check_len("piece xi_matrix columns", n, row.len())?;
            }
            let finite = piece
                .xi_matrix
                .iter()
                .flatten()
                .chain(&piece.xi_offset)
                .chain(&piece.x_coeffs)
                .all(|v| v.is_finite())
                && piece.constant.is_finite();
            if !finite {
                return Err(invalid(format!("piece {k} has non-finite coefficients")));
            }
        }
        let probe = solve_lp(&self.decision_lp(vec![0.0; n], 0))?;
        if probe.status == LpStatus::Infeasible {
            return Err(invalid("decision set X is empty"));
        }
        Ok(())
    }

    /// LP over `(x, extra…)` carrying X's rows and bounds; the extra
    /// variables are free.
    pub fn decision_lp(&self, objective: Vec<f64>, extra: usize) -> LinearProgram {
        let n = self.n();
        let total = n + extra;
        let mut obj = objective;
        obj.resize(total, 0.0);
        let mut lower = self.decision_set.lower.clone();
        let mut upper = self.decision_set.upper.clone();
        lower.resize(total, f64::NEG_INFINITY);
        upper.resize(total, f64::INFINITY);
        let mut lp = LinearProgram::new(obj).with_bounds(lower, upper);
        for c in &self.decision_set.constraints {
            let mut row = c.coeffs.clone();
            row.resize(total, 0.0);
            lp.add_le(row, c.rhs);
        }
        lp
    }

    /// `F(x, ξ)`.
    pub fn constraint_value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.eval(x, xi))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(∇_ξ, offset)` of every piece at `x`.
    pub fn pieces_at(&self, x: &[f64]) -> Vec<(Vec<f64>, f64)> {
        self.pieces.iter().map(|p| (p.xi_gradient(x), p.offset(x))).collect()
    }

    /// Largest violation of X's bounds and rows at `x`.
    pub fn decision_violation(&self, x: &[f64]) -> f64 {
        if x.len() != self.n() {
            return f64::INFINITY;
        }
        let ds = &self.decision_set;
        let mut worst: f64 = 0.0;
        for ((v, lo), hi) in x.iter().zip(&ds.lower).zip(&ds.upper) {
            worst = worst.max(lo - v).max(v - hi);
        }
        for c in &ds.constraints {
            worst = worst.max(dot(&c.coeffs, x) - c.rhs);
        }
        worst
    }

    pub fn check_decision(&self, x: &[f64]) -> Result<()> {
        check_len("decision vector", self.n(), x.len())?;
        let violation = self.decision_violation(x);
        if violation > DECISION_TOL {
            return Err(Error::OutsideDecisionSet { violation });
        }
        Ok(())
    }

    /// Tight bounding box of X from `2n` LPs.
    pub fn decision_hull(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut obj = vec![0.0; n];
                obj[j] = sign;
                let sol = solve_lp(&self.decision_lp(obj, 0))?;
                match sol.status {
                    LpStatus::Optimal => {
                        if sign > 0.0 {
                            lower[j] = sol.point[j];
                        } else {
                            upper[j] = sol.point[j];
                        }
                    }
                    LpStatus::Unbounded => return Err(invalid("decision set X is unbounded")),
                    LpStatus::Infeasible => return Err(invalid("decision set X is empty")),
                    LpStatus::NumericalFailure => return Err(Error::Solver("bounding LP for X failed".into())),
                }
            }
        }
        Ok((lower, upper))
    }

    /// Interval-arithmetic enclosure of `F` over the decision box × Ξ.
    pub fn constraint_enclosure(&self) -> (f64, f64) {
        let ds = &self.decision_set;
        let mut lo_all = f64::NEG_INFINITY;
        let mut hi_all = f64::NEG_INFINITY;
        let span = |coef: &[f64], base: f64| -> (f64, f64) {
            coef.iter()
                .zip(ds.lower.iter().zip(&ds.upper))
                .fold((base, base), |(lo, hi), (c, (a, b))| {
                    let (p, q) = (c * a, c * b);
                    (lo + p.min(q), hi + p.max(q))
                })
        };
        for piece in &self.pieces {
            let (mut lo, mut hi) = span(&piece.x_coeffs, piece.constant);
            for (j, row) in piece.xi_matrix.iter().enumerate() {
                let (cl, ch) = span(row, piece.xi_offset[j]);
                let (a, b) = (self.support.lower[j], self.support.upper[j]);
                let prods = [cl * a, cl * b, ch * a, ch * b];
                lo += prods.iter().copied().fold(f64::INFINITY, f64::min);
                hi += prods.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            lo_all = lo_all.max(lo);
            hi_all = hi_all.max(hi);
        }
        (lo_all, hi_all)
    }

    /// `(min_Ξ F(x,·), max_Ξ F(x,·))`, each from LPs over the support box.
    pub fn constraint_range_at(&self, x: &[f64]) -> Result<(f64, f64)> {
        let m = self.m();
        let pieces = self.pieces_at(x);
        let bounds = |extra: usize| {
            let mut lower = self.support.lower.clone();
            let mut upper = self.support.upper.clone();
            lower.resize(m + extra, f64::NEG_INFINITY);
            upper.resize(m + extra, f64::INFINITY);
            (lower, upper)
        };
        let mut fmax = f64::NEG_INFINITY;
        for (g, b) in &pieces {
            let (lower, upper) = bounds(0);
            let lp = LinearProgram::new(g.iter().map(|v| -v).collect()).with_bounds(lower, upper);
            let sol = solve_lp(&lp)?;
            if !sol.is_optimal() {
                return Err(Error::Solver(format!("range LP ended with {:?}", sol.status)));
            }
            fmax = fmax.max(-sol.value + b);
        }
        // min over the box of max_k: epigraph variable τ ≥ g_k·ξ + b_k
        let mut obj = vec![0.0; m + 1];
        obj[m] = 1.0;
        let (lower, upper) = bounds(1);
        let mut lp = LinearProgram::new(obj).with_bounds(lower, upper);
        for (g, b) in &pieces {
            let mut row = g.clone();
            row.push(-1.0);
            lp.add_le(row, -b);
        }
        let sol = solve_lp(&lp)?;
        if !sol.is_optimal() {
            return Err(Error::Solver(format!("range LP ended with {:?}", sol.status)));
        }
        Ok((sol.value, fmax))
    }

    /// `min_{x∈X} max_{ξ∈Ξ} F(x, ξ)`; negative values certify a decision
    /// that keeps `F < 0` on all of Ξ.
    pub fn strict_feasibility_margin(&self) -> Result<f64> {
        let (n, m, k) = (self.n(), self.m(), self.pieces.len());
        // variables: x (n), τ, z_kj (k·m)
        let extra = 1 + k * m;
        let mut obj = vec![0.0; n + extra];
        obj[n] = 1.0;
        let mut lp = self.decision_lp(obj, extra);
        let z = |piece: usize, j: usize| n + 1 + piece * m + j;
        for (pi, piece) in self.pieces.iter().enumerate() {
            let mut row = vec![0.0; n + extra];
            row[..n].copy_from_slice(&piece.x_coeffs);
            row[n] = -1.0;
            for j in 0..m {
                row[z(pi, j)] = 1.0;
            }
            lp.add_le(row, -piece.constant);
            for j in 0..m {
                for v in [self.support.lower[j], self.support.upper[j]] {
                    // z ≥ (u_j + U_j x) v
                    let mut row = vec![0.0; n + extra];
                    for (l, u) in piece.xi_matrix[j].iter().enumerate() {
                        row[l] = u * v;
                    }
                    row[z(pi, j)] = -1.0;
                    lp.add_le(row, -piece.xi_offset[j] * v);
                }
            }
        }
        let sol = solve_lp(&lp)?;
        if !sol.is_optimal() {
            return Err(Error::Solver(format!("interior check LP ended with {:?}", sol.status)));
        }
        Ok(sol.value)
    }
}
