//! VaR/CVaR of discrete samples and worst-case expectations over
//! Wasserstein-1 balls with the ℓ1 ground metric.
//!
//! Worst-case expectations use the Kantorovich dual
//! `inf_{λ≥0} λθ + Σᵢ wᵢ sup_{ξ∈Ξ} [loss(ξ) − λ‖ξ − ξ̂ᵢ‖₁]`,
//! minimized over `λ ∈ [0, 2L]` by golden-section search.

use crate::distributions::{AmbiguitySet, EmpiricalDistribution};
use crate::error::{check_len, invalid, Error, Result};
use crate::lp::{solve_lp, LinearProgram};
use crate::numeric::{check_probability_vector, golden_section, stable_sum};
use crate::problem::ProblemSpec;
use crate::support::BoxSet;

/// Bracket tolerance of the λ search.
pub const LAMBDA_TOL: f64 = 1e-9;
/// Bracket tolerance of the t search in [`worst_case_cvar_value`]. Tighter
/// than the λ search because the objective there carries a `1/α` slope.
pub const T_TOL: f64 = 1e-10;

/// A real-valued random variable with finitely many outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl ScalarSample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_len("sample weights", values.len(), weights.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sample values must be finite"));
        }
        check_probability_vector(&weights)?;
        Ok(Self { values, weights })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len().max(1);
        let w = vec![1.0 / n as f64; values.len()];
        Self::new(values, w)
    }

    /// Distribution of `f(ξ)` under `dist`.
    pub fn pushforward<F: Fn(&[f64]) -> f64>(dist: &EmpiricalDistribution, f: F) -> Result<Self> {
        Self::new(dist.points().iter().map(|p| f(p)).collect(), dist.weights().to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> f64 {
        stable_sum(self.values.iter().zip(&self.weights).map(|(v, w)| v * w))
    }

    /// Smallest outcome with positive probability.
    pub fn essential_min(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    fn sorted(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.values.iter().copied().zip(self.weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// Smallest outcome `y` with `P(Y ≤ y) ≥ 1 − α`.
pub fn var_alpha(sample: &ScalarSample, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let level = 1.0 - alpha;
    let mut cum = 0.0;
    let pairs = sample.sorted();
    for (v, w) in &pairs {
        cum += w;
        if cum >= level - 1e-12 {
            return Ok(*v);
        }
    }
    Ok(pairs.last().map(|p| p.0).unwrap_or(f64::NAN))
}

/// `min_t α⁻¹ E[(Y + t)₊] − t`, evaluated exactly at every breakpoint
/// `t = −yᵢ`.
pub fn cvar_alpha(sample: &ScalarSample, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut pairs = sample.sorted();
    pairs.reverse();
    // excess = Σ_{i<k} wᵢ (yᵢ − y_k), mass = Σ_{i<k} wᵢ
    let (mut excess, mut mass) = (0.0, 0.0);
    let mut best = f64::INFINITY;
    let mut prev = pairs[0].0;
    for &(y, w) in &pairs {
        excess += mass * (prev - y);
        best = best.min(excess / alpha + y);
        mass += w;
        prev = y;
    }
    Ok(best)
}

/// One affine piece `gradient·ξ + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePiece {
    pub gradient: Vec<f64>,
    pub offset: f64,
}

/// `ξ ↦ max_k (gradient_k·ξ + offset_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineLoss {
    pieces: Vec<AffinePiece>,
}

impl PiecewiseAffineLoss {
    pub fn new(pieces: Vec<AffinePiece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| invalid("loss needs at least one piece"))?;
        let m = first.gradient.len();
        for p in &pieces {
            check_len("loss gradient", m, p.gradient.len())?;
            if p.gradient.iter().any(|g| !g.is_finite()) || !p.offset.is_finite() {
                return Err(invalid("loss coefficients must be finite"));
            }
        }
        Ok(Self { pieces })
    }

    /// `ξ ↦ (F(x, ξ) + t)₊ − tα` for a fixed `(x, t)`.
    pub fn epigraph_integrand(problem: &ProblemSpec, x: &[f64], t: f64) -> Self {
        let shift = t * problem.alpha;
        let mut pieces: Vec<AffinePiece> = problem
            .pieces_at(x)
            .into_iter()
            .map(|(gradient, offset)| AffinePiece {
                gradient,
                offset: offset + t - shift,
            })
            .collect();
        pieces.push(AffinePiece {
            gradient: vec![0.0; problem.m()],
            offset: -shift,
        });
        Self { pieces }
    }

    pub fn pieces(&self) -> &[AffinePiece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].gradient.len()
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.gradient.iter().zip(xi).map(|(g, v)| g * v).sum::<f64>() + p.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k ‖gradient_k‖_∞`, the ℓ1-Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.gradient.iter().map(|g| g.abs()))
            .fold(0.0, f64::max)
    }
}

/// How the inner `sup_ξ [gradient·ξ − λ‖ξ − ξ̂‖₁]` over a box is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InnerSupMethod {
    /// A `2m`-variable LP per atom and piece.
    #[default]
    Lp,
    /// Per-coordinate maximum over `{lo_j, ξ̂_j, hi_j}`; the problem separates
    /// across coordinates and each coordinate objective is concave piecewise
    /// linear with those breakpoints.
    Vertex,
}

/// Value of the dual problem and the λ attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstCase {
    pub value: f64,
    pub lambda: f64,
}

fn inner_sup_lp(piece: &AffinePiece, center: &[f64], lambda: f64, support: &BoxSet) -> Result<f64> {
    let m = center.len();
    // variables (ξ, d) with d_j ≥ |ξ_j − ξ̂_j|
    let mut obj: Vec<f64> = piece.gradient.iter().map(|g| -g).collect();
    obj.extend(std::iter::repeat_n(lambda, m));
    let mut lower = support.lower.clone();
    let mut upper = support.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut lp = LinearProgram::new(obj).with_bounds(lower, upper);
    for j in 0..m {
        let mut row = vec![0.0; 2 * m];
        row[j] = 1.0;
        row[m + j] = -1.0;
        lp.add_le(row.clone(), center[j]);
        row[j] = -1.0;
        lp.add_le(row, -center[j]);
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("inner supremum LP ended with {:?}", sol.status)));
    }
    Ok(-sol.value + piece.offset)
}

fn inner_sup_vertex(piece: &AffinePiece, center: &[f64], lambda: f64, support: &BoxSet) -> f64 {
    let mut total = piece.offset;
    for (j, (&g, &c)) in piece.gradient.iter().zip(center).enumerate() {
        let (lo, hi) = (support.lower[j], support.upper[j]);
        let at = |v: f64| g * v - lambda * (v - c).abs();
        total += at(c).max(at(lo)).max(at(hi));
    }
    total
}

fn dual_objective(
    loss: &PiecewiseAffineLoss,
    ambiguity: &AmbiguitySet,
    support: &BoxSet,
    lambda: f64,
    method: InnerSupMethod,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(ambiguity.center().len());
    for (p, w) in ambiguity.center().iter() {
        let mut best = f64::NEG_INFINITY;
        for piece in loss.pieces() {
            let v = match method {
                InnerSupMethod::Lp => inner_sup_lp(piece, p, lambda, support)?,
                InnerSupMethod::Vertex => inner_sup_vertex(piece, p, lambda, support),
            };
            best = best.max(v);
        }
        terms.push(w * best);
    }
    Ok(lambda * ambiguity.radius() + stable_sum(terms))
}

/// `sup_{Q ∈ ball} E_Q[loss]` with inner suprema solved by LP.
pub fn worst_case_expectation(loss: &PiecewiseAffineLoss, ambiguity: &AmbiguitySet, support: &BoxSet) -> Result<f64> {
    Ok(worst_case_expectation_with(loss, ambiguity, support, InnerSupMethod::Lp)?.value)
}

pub fn worst_case_expectation_with(
    loss: &PiecewiseAffineLoss,
    ambiguity: &AmbiguitySet,
    support: &BoxSet,
    method: InnerSupMethod,
) -> Result<WorstCase> {
    check_len("loss dimension", support.dim(), loss.dim())?;
    ambiguity.center().check_support(support)?;
    if ambiguity.radius() == 0.0 {
        return Ok(WorstCase {
            value: ambiguity.center().expectation(|p| loss.eval(p)),
            lambda: 0.0,
        });
    }
    let hi = 2.0 * loss.lipschitz();
    let mut failure = None;
    let (lambda, value) = golden_section(
        |l| match dual_objective(loss, ambiguity, support, l, method) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        0.0,
        hi,
        LAMBDA_TOL,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(WorstCase { value, lambda }),
    }
}

/// `E_ref[(F(x, ξ) + t)₊ − tα]`.
pub fn evaluate_v(problem: &ProblemSpec, reference: &EmpiricalDistribution, x: &[f64], t: f64) -> Result<f64> {
    problem.check_decision(x)?;
    check_len("reference dimension", problem.m(), reference.dim())?;
    let shift = t * problem.alpha;
    Ok(reference.expectation(|xi| (problem.constraint_value(x, xi) + t).max(0.0) - shift))
}

/// Worst case of [`evaluate_v`] over the ambiguity set, inner suprema by LP.
pub fn evaluate_vhat(problem: &ProblemSpec, ambiguity: &AmbiguitySet, x: &[f64], t: f64) -> Result<f64> {
    evaluate_vhat_with(problem, ambiguity, x, t, InnerSupMethod::Lp)
}

pub fn evaluate_vhat_with(
    problem: &ProblemSpec,
    ambiguity: &AmbiguitySet,
    x: &[f64],
    t: f64,
    method: InnerSupMethod,
) -> Result<f64> {
    problem.check_decision(x)?;
    if ambiguity.radius() == 0.0 {
        return evaluate_v(problem, ambiguity.center(), x, t);
    }
    let loss = PiecewiseAffineLoss::epigraph_integrand(problem, x, t);
    Ok(worst_case_expectation_with(&loss, ambiguity, &problem.support, method)?.value)
}

/// `inf_t sup_Q CVaR`-form value `α⁻¹ inf_t v̂(x, t)`; `x` is feasible for
/// the distributionally robust risk constraint iff this is `≤ 0`.
pub fn worst_case_cvar_value(problem: &ProblemSpec, ambiguity: &AmbiguitySet, x: &[f64]) -> Result<f64> {
    worst_case_cvar_value_with(problem, ambiguity, x, InnerSupMethod::Lp)
}

pub fn worst_case_cvar_value_with(
    problem: &ProblemSpec,
    ambiguity: &AmbiguitySet,
    x: &[f64],
    method: InnerSupMethod,
) -> Result<f64> {
    problem.check_decision(x)?;
    let (fmin, fmax) = problem.constraint_range_at(x)?;
    let mut failure = None;
    let (_, value) = golden_section(
        |t| match evaluate_vhat_with(problem, ambiguity, x, t, method) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        -fmax,
        -fmin + 1.0,
        T_TOL,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(value / problem.alpha),
    }
}

/// `max_k max_{x∈X} ‖u_k + U_k x‖_∞`, from `2Km` LPs over X.
pub fn lipschitz_constant(problem: &ProblemSpec) -> Result<f64> {
    let n = problem.n();
    let mut best: f64 = 0.0;
    for piece in &problem.pieces {
        for (row, u) in piece.xi_matrix.iter().zip(&piece.xi_offset) {
            if row.iter().all(|v| *v == 0.0) {
                best = best.max(u.abs());
                continue;
            }
            for sign in [1.0, -1.0] {
                let obj: Vec<f64> = row.iter().map(|v| -sign * v).collect();
                let sol = solve_lp(&problem.decision_lp(obj, 0))?;
                if !sol.is_optimal() {
                    return Err(invalid(format!(
                        "cannot bound the ξ-gradient over X (LP status {:?})",
                        sol.status
                    )));
                }
                best = best.max(sign * u - sol.value);
            }
        }
        debug_assert_eq!(piece.x_coeffs.len(), n);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform14() -> ScalarSample {
        ScalarSample::uniform(vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn var_examples() {
        let d = ScalarSample::uniform(vec![7.0]).unwrap();
        assert_eq!(var_alpha(&d, 0.1).unwrap(), 7.0);
        assert_eq!(var_alpha(&uniform14(), 0.5).unwrap(), 2.0);
        assert_eq!(var_alpha(&uniform14(), 0.25).unwrap(), 3.0);
        assert!(matches!(var_alpha(&d, 0.0), Err(Error::InvalidAlpha(_))));
        assert!(var_alpha(&d, 1.0).is_err());
    }

    #[test]
    fn cvar_examples() {
        for alpha in [0.01, 0.3, 0.99] {
            let d = ScalarSample::uniform(vec![-2.5]).unwrap();
            assert_eq!(cvar_alpha(&d, alpha).unwrap(), -2.5);
        }
        assert!((cvar_alpha(&uniform14(), 0.5).unwrap() - 3.5).abs() < 1e-15);
        // tail mean with a split atom: top 0.3 of {1,2,3,4} is 0.25·4 + 0.05·3
        assert!((cvar_alpha(&uniform14(), 0.3).unwrap() - (1.0 + 0.15) / 0.3).abs() < 1e-12);
        assert!(cvar_alpha(&uniform14(), 1.5).is_err());
    }

    #[test]
    fn cvar_matches_breakpoint_scan() {
        let s = ScalarSample::new(vec![0.3, -1.0, 2.0, 2.0, 0.7], vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
        for alpha in [0.05, 0.2, 0.5, 0.9] {
            let scan = s
                .values()
                .iter()
                .map(|&y| {
                    let t = -y;
                    s.values()
                        .iter()
                        .zip(s.weights())
                        .map(|(v, w)| w * (v + t).max(0.0))
                        .sum::<f64>()
                        / alpha
                        - t
                })
                .fold(f64::INFINITY, f64::min);
            assert!((cvar_alpha(&s, alpha).unwrap() - scan).abs() < 1e-12);
        }
    }

    fn line_loss() -> PiecewiseAffineLoss {
        PiecewiseAffineLoss::new(vec![AffinePiece {
            gradient: vec![1.0],
            offset: 0.0,
        }])
        .unwrap()
    }

    #[test]
    fn worst_case_moves_mass_up() {
        let support = BoxSet::interval(0.0, 100.0).unwrap();
        let ball = AmbiguitySet::new(EmpiricalDistribution::dirac(vec![1.0]).unwrap(), 0.5).unwrap();
        for method in [InnerSupMethod::Lp, InnerSupMethod::Vertex] {
            let wc = worst_case_expectation_with(&line_loss(), &ball, &support, method).unwrap();
            assert!((wc.value - 1.5).abs() < 1e-8, "{method:?}: {}", wc.value);
        }
        let zero = AmbiguitySet::singleton(EmpiricalDistribution::dirac(vec![1.0]).unwrap());
        assert_eq!(worst_case_expectation(&line_loss(), &zero, &support).unwrap(), 1.0);
    }

    #[test]
    fn flat_loss_on_support() {
        let support = BoxSet::interval(0.0, 2.0).unwrap();
        let loss = PiecewiseAffineLoss::new(vec![
            AffinePiece {
                gradient: vec![1.0],
                offset: -2.0,
            },
            AffinePiece {
                gradient: vec![0.0],
                offset: 0.0,
            },
        ])
        .unwrap();
        let ball = AmbiguitySet::new(EmpiricalDistribution::dirac(vec![0.0]).unwrap(), 1.0).unwrap();
        assert!(worst_case_expectation(&loss, &ball, &support).unwrap().abs() < 1e-9);
        assert!(PiecewiseAffineLoss::new(vec![]).is_err());
    }

    #[test]
    fn v_examples() {
        let p = ProblemSpec::scalar_budget(0.1).unwrap();
        let delta = EmpiricalDistribution::dirac(vec![1.0]).unwrap();
        assert_eq!(evaluate_v(&p, &delta, &[1.0], 0.0).unwrap(), 0.0);
        let two = EmpiricalDistribution::uniform(vec![vec![0.0], vec![2.0]]).unwrap();
        assert!((evaluate_v(&p, &two, &[1.0], 0.0).unwrap() - 0.5).abs() < 1e-15);
        // all F + t ≥ 0: E[F] + t(1 − α)
        let v = evaluate_v(&p, &two, &[1.0], 3.0).unwrap();
        assert!((v - (0.0 + 3.0 * 0.9)).abs() < 1e-12);
        assert!(matches!(
            evaluate_v(&p, &two, &[11.0], 0.0),
            Err(Error::OutsideDecisionSet { .. })
        ));
        let ball = AmbiguitySet::singleton(two.clone());
        assert_eq!(
            evaluate_vhat(&p, &ball, &[1.3], 0.4).unwrap(),
            evaluate_v(&p, &two, &[1.3], 0.4).unwrap()
        );
    }

    #[test]
    fn cvar_value_at_zero_radius() {
        let p = ProblemSpec::scalar_budget(0.1).unwrap();
        let d = EmpiricalDistribution::uniform((0..7).map(|i| vec![0.3 * i as f64]).collect()).unwrap();
        let x = [0.8];
        let s = ScalarSample::pushforward(&d, |xi| p.constraint_value(&x, xi)).unwrap();
        let direct = cvar_alpha(&s, 0.1).unwrap();
        let ball = AmbiguitySet::singleton(d);
        assert!((worst_case_cvar_value(&p, &ball, &x).unwrap() - direct).abs() < 1e-8);
    }

    #[test]
    fn lipschitz_examples() {
        let p = ProblemSpec::scalar_budget(0.1).unwrap();
        assert!((lipschitz_constant(&p).unwrap() - 10.0).abs() < 1e-12);
        let mut flat = p.clone();
        flat.pieces[0].xi_matrix = vec![vec![0.0]];
        assert_eq!(lipschitz_constant(&flat).unwrap(), 0.0);
        let mut double = p.clone();
        double.pieces[0] = p.pieces[0].scaled(2.0);
        assert!((lipschitz_constant(&double).unwrap() - 20.0).abs() < 1e-12);
    }
}
