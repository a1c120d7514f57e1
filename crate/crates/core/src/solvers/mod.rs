//! Risk- and chance-constrained programs over a polyhedral decision set.

mod epigraph;
mod grid;

pub use grid::{solve_ccp_reference, solve_drccp, GridConfig};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distributions::{AmbiguitySet, EmpiricalDistribution};
use crate::error::Result;
use crate::lp::LpStatus;
use crate::numeric::dot;
use crate::problem::ProblemSpec;
use crate::risk::lipschitz_constant;
use epigraph::{Epigraph, Outcome};

/// Reformulations with more tableau entries than this go through cutting
/// planes instead.
pub const REFORMULATION_LIMIT: usize = 250_000;
/// Cut-loop stopping tolerance on the joint constraint value.
pub const CUT_TOL: f64 = 1e-10;
pub const MAX_CUTS: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Optimal => "Optimal",
            Self::Infeasible => "Infeasible",
            Self::NumericalFailure => "NumericalFailure",
        }
    }
}

impl From<LpStatus> for SolveStatus {
    fn from(s: LpStatus) -> Self {
        match s {
            LpStatus::Optimal => Self::Optimal,
            LpStatus::Infeasible => Self::Infeasible,
            // the y-box is bounded, so an unbounded master is a numerical artifact
            LpStatus::Unbounded | LpStatus::NumericalFailure => Self::NumericalFailure,
        }
    }
}

/// Which LP route the risk-constrained solvers take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpigraphMethod {
    /// Reformulation when it fits under [`REFORMULATION_LIMIT`], cutting
    /// planes otherwise.
    #[default]
    Auto,
    Reformulation,
    CuttingPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDiagnostics {
    pub initial_resolution: usize,
    pub refine_resolution: usize,
    pub rounds: usize,
    /// Grid spacing per coordinate in the last round.
    pub final_step: Vec<f64>,
    pub points_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub iterations: usize,
    #[serde(default)]
    pub cuts: usize,
    /// `sᵢ`: per-sample value of the inner maximum at the solution.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_epigraph: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDiagnostics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// `c·x`; NaN (written as `null`) unless optimal.
    #[serde(serialize_with = "nan_as_null", deserialize_with = "null_as_nan")]
    pub value: f64,
    pub x: Vec<f64>,
    /// Epigraph variable, absent for the chance-constrained programs.
    pub t: Option<f64>,
    pub diagnostics: Diagnostics,
}

fn nan_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn null_as_nan<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl SolveResult {
    pub fn failed(status: SolveStatus, diagnostics: Diagnostics) -> Self {
        Self {
            status,
            value: f64::NAN,
            x: Vec::new(),
            t: None,
            diagnostics,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

fn interior_warning(problem: &ProblemSpec) -> Option<String> {
    match problem.strict_feasibility_margin() {
        Ok(margin) if margin < 0.0 => None,
        Ok(margin) => Some(format!(
            "no x ∈ X keeps F(x, ξ) < 0 on all of Ξ (min-max value {margin:.3e}); consistency guarantees may not apply"
        )),
        Err(e) => Some(format!("interior check failed: {e}")),
    }
}

fn run_epigraph(problem: &ProblemSpec, epi: &Epigraph, method: EpigraphMethod, label: &str) -> Result<SolveResult> {
    let (rows, cols) = epi.reformulation_size();
    let use_lp = match method {
        EpigraphMethod::Auto => rows.saturating_mul(rows + cols) <= REFORMULATION_LIMIT,
        EpigraphMethod::Reformulation => true,
        EpigraphMethod::CuttingPlane => false,
    };
    let outcome: Outcome = if use_lp {
        epi.solve_reformulation(problem)?
    } else {
        epi.solve_cutting_plane(problem, CUT_TOL, MAX_CUTS)?
    };
    let mut diagnostics = Diagnostics {
        method: format!("{label}/{}", if use_lp { "reformulation" } else { "cutting-plane" }),
        iterations: outcome.iterations,
        cuts: outcome.cuts,
        ..Default::default()
    };
    diagnostics.warnings.extend(interior_warning(problem));
    let status = SolveStatus::from(outcome.status);
    if status != SolveStatus::Optimal {
        return Ok(SolveResult::failed(status, diagnostics));
    }
    let n = problem.n();
    let y = outcome.y;
    let x = y[..n].to_vec();
    if epi.ny > n + 1 {
        diagnostics.lambda = Some(y[n + 1]);
    }
    diagnostics.sample_epigraph = epi.evaluate(&y).per_atom;
    Ok(SolveResult {
        status,
        value: dot(&problem.objective, &x),
        x,
        t: Some(y[n]),
        diagnostics,
    })
}

/// `min c·x` over `x ∈ X` with the worst-case CVaR over the ball `≤ 0`.
pub fn solve_drrcp(problem: &ProblemSpec, ambiguity: &AmbiguitySet) -> Result<SolveResult> {
    solve_drrcp_with(problem, ambiguity, EpigraphMethod::Auto)
}

pub fn solve_drrcp_with(
    problem: &ProblemSpec,
    ambiguity: &AmbiguitySet,
    method: EpigraphMethod,
) -> Result<SolveResult> {
    ambiguity.center().check_support(&problem.support)?;
    let l = lipschitz_constant(problem)?;
    let epi = Epigraph::wasserstein_dual(problem, ambiguity, l)?;
    run_epigraph(problem, &epi, method, "drrcp")
}

/// `min c·x` over `x ∈ X` with `CVaR_α` under `reference` `≤ 0`.
pub fn solve_rcp_reference(problem: &ProblemSpec, reference: &EmpiricalDistribution) -> Result<SolveResult> {
    solve_rcp_reference_with(problem, reference, EpigraphMethod::Auto)
}

pub fn solve_rcp_reference_with(
    problem: &ProblemSpec,
    reference: &EmpiricalDistribution,
    method: EpigraphMethod,
) -> Result<SolveResult> {
    crate::error::check_len("reference dimension", problem.m(), reference.dim())?;
    let epi = Epigraph::sample_average(problem, reference)?;
    run_epigraph(problem, &epi, method, "rcp")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LinearConstraint;
    use crate::risk::evaluate_vhat_with;
    use crate::risk::InnerSupMethod;

    fn p1() -> ProblemSpec {
        ProblemSpec::scalar_budget(0.1).unwrap()
    }

    fn grid_reference(n: usize) -> EmpiricalDistribution {
        EmpiricalDistribution::uniform((0..n).map(|k| vec![2.0 * (k as f64 + 0.5) / n as f64]).collect()).unwrap()
    }

    #[test]
    fn point_mass_reference() {
        let r = solve_rcp_reference(&p1(), &EmpiricalDistribution::dirac(vec![1.0]).unwrap()).unwrap();
        assert!(r.is_optimal());
        assert!((r.value + 1.0).abs() < 1e-9 && (r.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_reference() {
        let mut p = p1();
        p.decision_set.constraints.push(LinearConstraint {
            coeffs: vec![-1.0],
            rhs: -5.0,
        });
        let r = solve_rcp_reference(&p, &EmpiricalDistribution::dirac(vec![1.0]).unwrap()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.value.is_nan());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"value\":null"));
    }

    #[test]
    fn routes_agree() {
        let p = p1();
        let reference = grid_reference(40);
        let a = solve_rcp_reference_with(&p, &reference, EpigraphMethod::Reformulation).unwrap();
        let b = solve_rcp_reference_with(&p, &reference, EpigraphMethod::CuttingPlane).unwrap();
        assert!((a.value - b.value).abs() < 1e-8, "{} vs {}", a.value, b.value);
        for theta in [0.0, 0.05, 0.3] {
            let ball = AmbiguitySet::new(grid_reference(12), theta).unwrap();
            let a = solve_drrcp_with(&p, &ball, EpigraphMethod::Reformulation).unwrap();
            let b = solve_drrcp_with(&p, &ball, EpigraphMethod::CuttingPlane).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-8,
                "θ={theta}: {} vs {}",
                a.value,
                b.value
            );
            let check = evaluate_vhat_with(&p, &ball, &a.x, a.t.unwrap(), InnerSupMethod::Lp).unwrap();
            assert!(check <= 1e-6, "θ={theta}: v̂ = {check}");
        }
    }

    #[test]
    fn large_radius_saturates_at_upper_support_edge() {
        // every atom can be moved to ξ = 2, so the constraint becomes 2x − 1 ≤ 0
        let p = p1();
        let ball = AmbiguitySet::new(grid_reference(10), 2.0 * 10.0 * 2.0).unwrap();
        let r = solve_drrcp(&p, &ball).unwrap();
        assert!(r.is_optimal());
        assert!((r.x[0] - 0.5).abs() < 1e-9 && (r.value + 0.5).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn zero_radius_matches_sample_average() {
        let p = p1();
        let reference = grid_reference(25);
        let a = solve_rcp_reference(&p, &reference).unwrap();
        let b = solve_drrcp(&p, &AmbiguitySet::singleton(reference)).unwrap();
        assert!((a.value - b.value).abs() < 1e-7);
    }
}
