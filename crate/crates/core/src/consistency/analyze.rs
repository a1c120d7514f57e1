use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentMode, ExperimentTrace, Thresholds, SCHEMA_VERSION};
use crate::distributions::{wasserstein1_auto, AmbiguitySet, EmpiricalDistribution};
use crate::error::{invalid, Result};
use crate::numeric::{median, quantile};
use crate::problem::ProblemSpec;
use crate::risk::{evaluate_v, evaluate_vhat_with, lipschitz_constant, InnerSupMethod};
use crate::solvers::{solve_ccp_reference, solve_rcp_reference};

/// Transport LPs above this many cells are skipped when bounding the gap.
const W1_LP_LIMIT: usize = 40_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub j_star: f64,
    pub x_star: Vec<Vec<f64>>,
    /// `analytic` or a description of the reference solve.
    pub source: String,
}

/// Analytic reference from the config when present, otherwise the
/// reference solve on the truth discretization.
pub fn reference_solution(config: &ExperimentConfig, mode: ExperimentMode) -> Result<ReferenceSolution> {
    let analytic = match mode {
        ExperimentMode::Drccp => &config.reference.drccp,
        _ => &config.reference.drrcp,
    };
    if let Some(a) = analytic {
        return Ok(ReferenceSolution {
            j_star: a.j_star,
            x_star: a.x_star.clone(),
            source: "analytic".into(),
        });
    }
    let truth = config.truth_reference()?;
    let (solved, label) = match mode {
        ExperimentMode::Drccp => (
            solve_ccp_reference(&config.problem, &truth, &config.grid_config())?,
            "ccp",
        ),
        _ => (solve_rcp_reference(&config.problem, &truth)?, "rcp"),
    };
    if !solved.is_optimal() {
        return Err(invalid(format!(
            "reference {label} solve on the truth discretization ended with {:?}",
            solved.status
        )));
    }
    Ok(ReferenceSolution {
        j_star: solved.value,
        x_star: vec![solved.x],
        source: format!("{label} on {}-atom truth discretization", truth.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStats {
    pub n: usize,
    pub epsilon: f64,
    pub beta: f64,
    pub optimal: usize,
    pub failed: usize,
    /// Fraction of optimal paths with `J_N ≥ J* − value_tol`.
    pub fraction_above: f64,
    pub median_value_error: f64,
    pub p90_value_error: f64,
    pub median_x_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_bound: Option<f64>,
    /// `W1(P̂_N, truth reference)` on the gap path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1_to_truth: Option<f64>,
}

/// `None` when the corresponding threshold is not configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// Fraction of paths above `J* − tol` meets `min_fraction` from `from_n`
    /// on, and every path is above at `all_paths_at`.
    pub value_from_above: bool,
    pub value_error: Option<bool>,
    pub value_improves: Option<bool>,
    pub decision_error: Option<bool>,
    pub gap_nonincreasing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub schema_version: u32,
    pub mode: ExperimentMode,
    pub j_star: f64,
    pub x_star: Vec<Vec<f64>>,
    pub reference_source: String,
    pub thresholds: Thresholds,
    /// N from which the fraction check applies.
    pub from_n: usize,
    pub per_n: Vec<NStats>,
    pub verdicts: Verdicts,
}

fn x_distance(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter()
        .map(|s| s.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Aggregates one program's traces against its reference solution.
/// Non-optimal traces are excluded from the statistics and counted in
/// `failed`.
pub fn analyze(
    traces: &[ExperimentTrace],
    reference: &ReferenceSolution,
    thresholds: &Thresholds,
    mode: ExperimentMode,
) -> Result<ConsistencyReport> {
    let mut ns: Vec<usize> = traces.iter().filter(|t| t.mode == mode).map(|t| t.n).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() {
        return Err(invalid(format!("no {} traces to analyze", mode.label())));
    }
    let j = reference.j_star;
    let mut per_n = Vec::with_capacity(ns.len());
    for &n in &ns {
        let cell: Vec<&ExperimentTrace> = traces.iter().filter(|t| t.mode == mode && t.n == n).collect();
        let ok: Vec<&&ExperimentTrace> = cell.iter().filter(|t| t.is_optimal()).collect();
        let errors: Vec<f64> = ok.iter().map(|t| (t.value - j).abs()).collect();
        let above = ok.iter().filter(|t| t.value >= j - thresholds.value_tol).count();
        let x_errors: Vec<f64> = if reference.x_star.is_empty() {
            Vec::new()
        } else {
            ok.iter().map(|t| x_distance(&t.x, &reference.x_star)).collect()
        };
        per_n.push(NStats {
            n,
            epsilon: cell[0].epsilon,
            beta: cell[0].beta,
            optimal: ok.len(),
            failed: cell.len() - ok.len(),
            fraction_above: if ok.is_empty() {
                0.0
            } else {
                above as f64 / ok.len() as f64
            },
            median_value_error: median(&errors),
            p90_value_error: quantile(&errors, 0.9),
            median_x_error: median(&x_errors),
            uniform_gap: None,
            gap_bound: None,
            w1_to_truth: None,
        });
    }
    let from_n = thresholds.from_n.unwrap_or(if ns.len() > 1 { ns[1] } else { ns[0] });
    let mut report = ConsistencyReport {
        schema_version: SCHEMA_VERSION,
        mode,
        j_star: j,
        x_star: reference.x_star.clone(),
        reference_source: reference.source.clone(),
        thresholds: thresholds.clone(),
        from_n,
        per_n,
        verdicts: Verdicts {
            value_from_above: false,
            value_error: None,
            value_improves: None,
            decision_error: None,
            gap_nonincreasing: None,
        },
    };
    report.verdicts = report.derive_verdicts();
    Ok(report)
}

impl ConsistencyReport {
    fn stats_at(&self, n: usize) -> Option<&NStats> {
        self.per_n.iter().find(|s| s.n == n)
    }

    /// Recomputes the verdicts from the stored aggregates.
    pub fn derive_verdicts(&self) -> Verdicts {
        let th = &self.thresholds;
        let last = self.per_n.last().expect("report has at least one N");
        let mut from_above = self
            .per_n
            .iter()
            .filter(|s| s.n >= self.from_n)
            .all(|s| s.optimal > 0 && s.fraction_above >= th.min_fraction);
        if let Some(n) = th.all_paths_at {
            from_above &= self
                .stats_at(n)
                .is_some_and(|s| s.failed == 0 && s.fraction_above == 1.0);
        }
        let value_error = th.value_error_max.map(|max| last.median_value_error <= max);
        let value_improves = th.improve_over.map(|n| {
            self.stats_at(n)
                .is_some_and(|s| last.median_value_error < s.median_value_error - th.value_tol)
        });
        let decision_error = th.x_error_max.map(|max| last.median_x_error <= max);
        let gaps: Vec<f64> = self.per_n.iter().filter_map(|s| s.uniform_gap).collect();
        let gap_nonincreasing =
            (gaps.len() >= 2).then(|| gaps.windows(2).all(|w| w[1] <= w[0] * (1.0 + th.gap_slack) + 1e-12));
        Verdicts {
            value_from_above: from_above,
            value_error,
            value_improves,
            decision_error,
            gap_nonincreasing,
        }
    }

    pub fn all_passed(&self) -> bool {
        let v = &self.verdicts;
        v.value_from_above
            && [v.value_error, v.value_improves, v.decision_error, v.gap_nonincreasing]
                .iter()
                .all(|x| x.unwrap_or(true))
    }

    /// Plain-text summary with one verdict per line.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "mode {}  J* = {:.9}  ({})\n",
            self.mode.label(),
            self.j_star,
            self.reference_source
        );
        s.push_str("       N    epsilon  ok fail  frac>=J*  med|J-J*|  p90|J-J*|  med|x-x*|  unif.gap\n");
        for st in &self.per_n {
            let gap = st.uniform_gap.map(|g| format!("{g:.3e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:>8} {:>10.5} {:>3} {:>4} {:>9.3} {:>10.3e} {:>10.3e} {:>10.3e} {:>9}\n",
                st.n,
                st.epsilon,
                st.optimal,
                st.failed,
                st.fraction_above,
                st.median_value_error,
                st.p90_value_error,
                st.median_x_error,
                gap
            ));
        }
        let fmt = |v: Option<bool>| match v {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "n/a",
        };
        let v = &self.verdicts;
        s.push_str(&format!(
            "verdict value_from_above (N >= {}, fraction >= {}): {}\n",
            self.from_n,
            self.thresholds.min_fraction,
            fmt(Some(v.value_from_above))
        ));
        s.push_str(&format!("verdict value_error: {}\n", fmt(v.value_error)));
        s.push_str(&format!("verdict value_improves: {}\n", fmt(v.value_improves)));
        s.push_str(&format!("verdict decision_error: {}\n", fmt(v.decision_error)));
        s.push_str(&format!("verdict gap_nonincreasing: {}\n", fmt(v.gap_nonincreasing)));
        s
    }
}

/// Grid over `X × [t_lo, t_hi]` for [`uniform_gap`].
#[derive(Debug, Clone, PartialEq)]
pub struct GapGrid {
    pub x: Vec<Vec<f64>>,
    pub t: Vec<f64>,
}

impl GapGrid {
    /// `x_points` per decision coordinate over the hull of X (points outside
    /// X dropped) and `t_points` over `[−F_hi, −F_lo]`, the enclosure of
    /// `−F` over X × Ξ.
    pub fn over(problem: &ProblemSpec, x_points: usize, t_points: usize) -> Result<Self> {
        let (lo, hi) = problem.decision_hull()?;
        let n = problem.n();
        let lin = |a: f64, b: f64, k: usize, count: usize| {
            if count <= 1 {
                (a + b) / 2.0
            } else {
                a + (b - a) * k as f64 / (count - 1) as f64
            }
        };
        let total = x_points.pow(n as u32);
        let x = (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; n];
                for j in (0..n).rev() {
                    p[j] = lin(lo[j], hi[j], idx % x_points, x_points);
                    idx /= x_points;
                }
                p
            })
            .filter(|p| problem.decision_violation(p) <= 1e-9)
            .collect();
        let (f_lo, f_hi) = problem.constraint_enclosure();
        let t = (0..t_points).map(|k| lin(-f_hi, -f_lo, k, t_points)).collect();
        Ok(Self { x, t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// `max |v̂(x, t) − v_ref(x, t)|` over the grid.
    pub gap: f64,
    /// `L·(W1(reference, center) + θ)`, when the distance is affordable.
    pub bound: Option<f64>,
    pub w1: Option<f64>,
}

/// Largest deviation between the worst-case and reference epigraph
/// functions on a grid.
pub fn uniform_gap(
    problem: &ProblemSpec,
    ambiguity: &AmbiguitySet,
    reference: &EmpiricalDistribution,
    grid: &GapGrid,
) -> Result<GapEstimate> {
    if grid.x.is_empty() || grid.t.is_empty() {
        return Err(invalid("uniform gap needs a nonempty (x, t) grid"));
    }
    let mut gap: f64 = 0.0;
    for x in &grid.x {
        for &t in &grid.t {
            let hat = evaluate_vhat_with(problem, ambiguity, x, t, InnerSupMethod::Vertex)?;
            let v = evaluate_v(problem, reference, x, t)?;
            gap = gap.max((hat - v).abs());
        }
    }
    let center = ambiguity.center();
    let w1 = if center.dim() == 1 || center.len() * reference.len() <= W1_LP_LIMIT {
        Some(wasserstein1_auto(reference, center)?)
    } else {
        None
    };
    let l = lipschitz_constant(problem)?;
    Ok(GapEstimate {
        gap,
        bound: w1.map(|w| l * (w + ambiguity.radius())),
        w1,
    })
}

/// Reports for every program in the config, with uniform-gap estimates on
/// the configured path when requested.
pub fn analyze_experiment(config: &ExperimentConfig, traces: &[ExperimentTrace]) -> Result<Vec<ConsistencyReport>> {
    let mut reports = Vec::new();
    for mode in config.mode.programs() {
        let reference = reference_solution(config, mode)?;
        let mut report = analyze(traces, &reference, &config.thresholds, mode)?;
        if let (Some(gap), ExperimentMode::Drrcp) = (&config.gap, mode) {
            let truth = config.truth_reference()?;
            let grid = GapGrid::over(&config.problem, gap.x_points, gap.t_points)?;
            let samples = config.path_samples(gap.path)?;
            for st in &mut report.per_n {
                let center = EmpiricalDistribution::uniform(samples[..st.n].to_vec())?;
                let ball = AmbiguitySet::new(center, st.epsilon)?;
                let est = uniform_gap(&config.problem, &ball, &truth, &grid)?;
                st.uniform_gap = Some(est.gap);
                st.gap_bound = est.bound;
                st.w1_to_truth = est.w1;
            }
            report.verdicts = report.derive_verdicts();
        }
        reports.push(report);
    }
    Ok(reports)
}
