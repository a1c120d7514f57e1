//! The joint constraint `a₀·y + Σᵢ wᵢ maxₚ [baseₚ(y) + Σⱼ max_v choiceₚⱼᵥ(y)] ≤ 0`
//! over `y = (x, t[, λ])`, shared by the risk-constrained programs.
//!
//! With the Wasserstein dual, the inner supremum over a box separates per
//! coordinate and each coordinate term is a maximum over the three candidate
//! values `{lo_j, ξ̂_j, hi_j}`, so the whole constraint is a finite maximum of
//! affine functions of `y`. It is solved either as one LP with epigraph
//! variables (`sᵢ` per atom, `z` per coordinate term) or by cutting planes on
//! a master LP in `y` alone.

use crate::distributions::{AmbiguitySet, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpSolution, LpStatus};
use crate::numeric::stable_sum;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone)]
pub(crate) struct Affine {
    pub coef: Vec<f64>,
    pub constant: f64,
}

impl Affine {
    fn zero(ny: usize) -> Self {
        Self {
            coef: vec![0.0; ny],
            constant: 0.0,
        }
    }

    fn eval(&self, y: &[f64]) -> f64 {
        self.coef.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + self.constant
    }

    fn add_scaled(&mut self, other: &Affine, w: f64) {
        for (a, b) in self.coef.iter_mut().zip(&other.coef) {
            *a += w * b;
        }
        self.constant += w * other.constant;
    }

    /// Lower bound over the box `[lo, hi]`.
    fn lower_over(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.coef
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(c, (a, b))| (c * a).min(c * b))
            .sum::<f64>()
            + self.constant
    }
}

#[derive(Debug, Clone)]
struct Piece {
    base: Affine,
    choices: Vec<Vec<Affine>>,
}

#[derive(Debug, Clone)]
struct Atom {
    weight: f64,
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone)]
pub(crate) struct Epigraph {
    pub ny: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    linear: Affine,
    atoms: Vec<Atom>,
}

/// Point evaluation of the joint constraint with its tight cut.
pub(crate) struct Evaluation {
    pub value: f64,
    pub cut: Affine,
    pub per_atom: Vec<f64>,
}

impl Epigraph {
    /// `y = (x, t)` with the empirical pieces `F_k(x, ξᵢ) + t` and `0`.
    pub fn sample_average(problem: &ProblemSpec, reference: &EmpiricalDistribution) -> Result<Self> {
        let n = problem.n();
        let ny = n + 1;
        let (lower, upper) = Self::bounds(problem, None)?;
        let mut linear = Affine::zero(ny);
        linear.coef[n] = -problem.alpha;
        let atoms = reference
            .iter()
            .map(|(p, w)| {
                let mut pieces: Vec<Piece> = problem
                    .pieces
                    .iter()
                    .map(|piece| {
                        let mut base = Affine::zero(ny);
                        for l in 0..n {
                            base.coef[l] = piece.x_coeffs[l]
                                + piece.xi_matrix.iter().zip(p).map(|(row, v)| row[l] * v).sum::<f64>();
                        }
                        base.coef[n] = 1.0;
                        base.constant = piece.constant + piece.xi_offset.iter().zip(p).map(|(u, v)| u * v).sum::<f64>();
                        Piece {
                            base,
                            choices: Vec::new(),
                        }
                    })
                    .collect();
                pieces.push(Piece {
                    base: Affine::zero(ny),
                    choices: Vec::new(),
                });
                Atom { weight: w, pieces }
            })
            .collect();
        Ok(Self {
            ny,
            lower,
            upper,
            linear,
            atoms,
        })
    }

    /// `y = (x, t, λ)` with the dual constraint
    /// `λθ − αt + Σᵢ wᵢ sup_ξ [(F(x,ξ) + t)₊ − λ‖ξ − ξ̂ᵢ‖₁] ≤ 0`.
    pub fn wasserstein_dual(problem: &ProblemSpec, ambiguity: &AmbiguitySet, lipschitz: f64) -> Result<Self> {
        let (n, m) = (problem.n(), problem.m());
        let ny = n + 2;
        let (li, ti) = (n + 1, n);
        let (lower, upper) = Self::bounds(problem, Some(lipschitz))?;
        let mut linear = Affine::zero(ny);
        linear.coef[ti] = -problem.alpha;
        linear.coef[li] = ambiguity.radius();
        let sup = &problem.support;
        let atoms = ambiguity
            .center()
            .iter()
            .map(|(p, w)| {
                let mut pieces: Vec<Piece> = problem
                    .pieces
                    .iter()
                    .map(|piece| {
                        let mut base = Affine::zero(ny);
                        base.coef[..n].copy_from_slice(&piece.x_coeffs);
                        base.coef[ti] = 1.0;
                        base.constant = piece.constant;
                        let mut choices = Vec::with_capacity(m);
                        for j in 0..m {
                            let row = &piece.xi_matrix[j];
                            if piece.xi_offset[j] == 0.0 && row.iter().all(|v| *v == 0.0) {
                                continue;
                            }
                            let mut values = vec![p[j]];
                            for v in [sup.lower[j], sup.upper[j]] {
                                if v != p[j] {
                                    values.push(v);
                                }
                            }
                            let opts = values
                                .into_iter()
                                .map(|v| {
                                    let mut a = Affine::zero(ny);
                                    for l in 0..n {
                                        a.coef[l] = row[l] * v;
                                    }
                                    a.coef[li] = -(v - p[j]).abs();
                                    a.constant = piece.xi_offset[j] * v;
                                    a
                                })
                                .collect();
                            choices.push(opts);
                        }
                        Piece { base, choices }
                    })
                    .collect();
                pieces.push(Piece {
                    base: Affine::zero(ny),
                    choices: Vec::new(),
                });
                Atom { weight: w, pieces }
            })
            .collect();
        Ok(Self {
            ny,
            lower,
            upper,
            linear,
            atoms,
        })
    }

    /// Box for `y`: the hull of X, `t ∈ [−F_hi − 1, −F_lo + 1]` from the
    /// enclosure of F, and `λ ∈ [0, 2L]`.
    fn bounds(problem: &ProblemSpec, lipschitz: Option<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mut lower, mut upper) = problem.decision_hull()?;
        let (f_lo, f_hi) = problem.constraint_enclosure();
        lower.push(-f_hi - 1.0);
        upper.push(-f_lo + 1.0);
        if let Some(l) = lipschitz {
            lower.push(0.0);
            upper.push(2.0 * l);
        }
        Ok((lower, upper))
    }

    pub fn evaluate(&self, y: &[f64]) -> Evaluation {
        let mut cut = self.linear.clone();
        let mut per_atom = Vec::with_capacity(self.atoms.len());
        let mut terms = Vec::with_capacity(self.atoms.len() + 1);
        terms.push(self.linear.eval(y));
        for atom in &self.atoms {
            let mut best = (f64::NEG_INFINITY, 0usize, Vec::new());
            for (pi, piece) in atom.pieces.iter().enumerate() {
                let mut value = piece.base.eval(y);
                let mut picks = Vec::with_capacity(piece.choices.len());
                for opts in &piece.choices {
                    let (k, v) =
                        opts.iter()
                            .map(|a| a.eval(y))
                            .enumerate()
                            .fold(
                                (0, f64::NEG_INFINITY),
                                |acc, (k, v)| if v > acc.1 { (k, v) } else { acc },
                            );
                    value += v;
                    picks.push(k);
                }
                if value > best.0 {
                    best = (value, pi, picks);
                }
            }
            let piece = &atom.pieces[best.1];
            cut.add_scaled(&piece.base, atom.weight);
            for (opts, k) in piece.choices.iter().zip(&best.2) {
                cut.add_scaled(&opts[*k], atom.weight);
            }
            per_atom.push(best.0);
            terms.push(atom.weight * best.0);
        }
        Evaluation {
            value: stable_sum(terms),
            cut,
            per_atom,
        }
    }

    fn base_lp(&self, problem: &ProblemSpec, extra: usize) -> LinearProgram {
        let total = self.ny + extra;
        let mut lp = problem.decision_lp(problem.objective.clone(), total - problem.n());
        for j in problem.n()..self.ny {
            lp.set_bounds(j, self.lower[j], self.upper[j]);
        }
        for j in 0..problem.n() {
            lp.set_bounds(
                j,
                self.lower[j].max(lp.lower_bounds[j]),
                self.upper[j].min(lp.upper_bounds[j]),
            );
        }
        lp
    }

    /// Size of the one-shot LP as (rows, columns).
    pub fn reformulation_size(&self) -> (usize, usize) {
        let mut rows = 1;
        let mut cols = self.ny + self.atoms.len();
        for atom in &self.atoms {
            for piece in &atom.pieces {
                rows += 1;
                cols += piece.choices.len();
                rows += piece.choices.iter().map(Vec::len).sum::<usize>();
            }
        }
        (rows, cols)
    }

    /// Solves the one-shot LP; the returned point is `y`.
    pub fn solve_reformulation(&self, problem: &ProblemSpec) -> Result<Outcome> {
        let (_, cols) = self.reformulation_size();
        let extra = cols - self.ny;
        let mut lp = self.base_lp(problem, extra);
        let s0 = self.ny;
        let mut z = s0 + self.atoms.len();
        let mut main = vec![0.0; cols];
        main[..self.ny].copy_from_slice(&self.linear.coef);
        for (i, atom) in self.atoms.iter().enumerate() {
            main[s0 + i] = atom.weight;
            // every atom has the zero piece, so sᵢ ≥ 0
            lp.set_bounds(s0 + i, 0.0, f64::INFINITY);
            for piece in &atom.pieces {
                let mut row = vec![0.0; cols];
                row[..self.ny].copy_from_slice(&piece.base.coef);
                row[s0 + i] = -1.0;
                for opts in &piece.choices {
                    row[z] = 1.0;
                    let floor = opts
                        .iter()
                        .map(|a| a.lower_over(&self.lower, &self.upper))
                        .fold(f64::NEG_INFINITY, f64::max);
                    lp.set_bounds(z, floor, f64::INFINITY);
                    for a in opts {
                        let mut r = vec![0.0; cols];
                        r[..self.ny].copy_from_slice(&a.coef);
                        r[z] = -1.0;
                        lp.add_le(r, -a.constant);
                    }
                    z += 1;
                }
                lp.add_le(row, -piece.base.constant);
            }
        }
        lp.add_le(main, -self.linear.constant);
        let sol = solve_lp(&lp)?;
        let iterations = sol.iterations;
        Ok(Outcome::from_lp(sol, self.ny, iterations, 0))
    }

    /// Kelley cutting planes until the constraint holds within `tol` at the
    /// master solution.
    pub fn solve_cutting_plane(&self, problem: &ProblemSpec, tol: f64, max_cuts: usize) -> Result<Outcome> {
        let mut lp = self.base_lp(problem, 0);
        let mut cuts: Vec<Affine> = Vec::new();
        for iteration in 1..=max_cuts {
            let sol = solve_lp(&lp)?;
            if sol.status != LpStatus::Optimal {
                return Ok(Outcome::from_lp(sol, self.ny, iteration, cuts.len()));
            }
            let y = &sol.point[..self.ny];
            let eval = self.evaluate(y);
            if eval.value <= tol {
                return Ok(Outcome::from_lp(sol, self.ny, iteration, cuts.len()));
            }
            let repeated = cuts.iter().any(|c| {
                (c.constant - eval.cut.constant).abs() <= 1e-12 * (1.0 + c.constant.abs())
                    && c.coef
                        .iter()
                        .zip(&eval.cut.coef)
                        .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
            });
            if repeated {
                return Err(Error::Solver(format!(
                    "cutting plane stalled with violation {:.3e} after {} cuts",
                    eval.value,
                    cuts.len()
                )));
            }
            lp.add_le(eval.cut.coef.clone(), -eval.cut.constant);
            cuts.push(eval.cut);
        }
        Ok(Outcome {
            status: LpStatus::NumericalFailure,
            y: Vec::new(),
            iterations: max_cuts,
            cuts: cuts.len(),
        })
    }
}

pub(crate) struct Outcome {
    pub status: LpStatus,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub cuts: usize,
}

impl Outcome {
    fn from_lp(sol: LpSolution, ny: usize, iterations: usize, cuts: usize) -> Self {
        let y = if sol.is_optimal() {
            sol.point[..ny].to_vec()
        } else {
            Vec::new()
        };
        Self {
            status: sol.status,
            y,
            iterations,
            cuts,
        }
    }
}
