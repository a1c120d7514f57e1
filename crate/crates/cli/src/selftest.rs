//! Fast embedded property suite behind `drolab selftest`.
//!
//! Every case is drawn from a fixed seed, so a run is reproducible. Building
//! with the `fault-injection` feature shifts one checked quantity so that the
//! suite must fail.

use drolab::chance::{
    empirical_prob_safe, nearest_unsafe_point, transport_oracle_prob_safe, worst_case_prob_safe, SafeSetQuery,
};
use drolab::distributions::{wasserstein1, wasserstein1_1d, AmbiguitySet, EmpiricalDistribution};
use drolab::problem::{BiAffinePiece, DecisionSet, ProblemSpec};
use drolab::risk::{cvar_alpha, evaluate_v, evaluate_vhat, var_alpha, ScalarSample};
use drolab::seed::{derive, generator};
use drolab::solvers::{solve_ccp_reference, solve_drccp, solve_drrcp, solve_rcp_reference, GridConfig};
use drolab::support::BoxSet;
use rand::Rng;

const SEED: u64 = 0x5e1f_7e57;
const TOL: f64 = 1e-9;

/// Added to one side of the CVaR translation check.
pub const PERTURBATION: f64 = if cfg!(feature = "fault-injection") { 1e-3 } else { 0.0 };

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// First few failure descriptions.
    pub failures: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            failed: 0,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.failures.len() < 5 {
                self.failures.push(what());
            }
        }
    }

    fn close(&mut self, a: f64, b: f64, tol: f64, what: &str) {
        self.check((a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())), || {
            format!("{what}: {a} vs {b}")
        });
    }

    fn error(&mut self, e: drolab::Error) {
        self.check(false, || format!("unexpected error: {e}"));
    }
}

fn random_dist(rng: &mut impl Rng, atoms: usize, dim: usize, lo: f64, hi: f64) -> EmpiricalDistribution {
    let points = (0..atoms)
        .map(|_| (0..dim).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    EmpiricalDistribution::new(points, raw.iter().map(|w| w / total).collect()).expect("valid random measure")
}

fn metric_axioms(cases: usize) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("metric axioms");
    let mut rng = generator(derive(SEED, 1));
    for case in 0..cases {
        let dim = 1 + case % 2;
        let atoms = rng.random_range(1..=5);
        let a = random_dist(&mut rng, atoms, dim, -2.0, 2.0);
        let b = {
            let k = rng.random_range(1..=5);
            random_dist(&mut rng, k, dim, -2.0, 2.0)
        };
        let c = {
            let k = rng.random_range(1..=5);
            random_dist(&mut rng, k, dim, -2.0, 2.0)
        };
        let run = || -> drolab::Result<(f64, f64, f64, f64, f64)> {
            Ok((
                wasserstein1(&a, &a)?,
                wasserstein1(&a, &b)?,
                wasserstein1(&b, &a)?,
                wasserstein1(&b, &c)?,
                wasserstein1(&a, &c)?,
            ))
        };
        match run() {
            Ok((aa, ab, ba, bc, ac)) => {
                s.check(aa.abs() <= TOL, || format!("W1(a, a) = {aa}"));
                s.close(ab, ba, TOL, "symmetry");
                s.check(ac <= ab + bc + TOL, || format!("triangle: {ac} > {ab} + {bc}"));
                s.check(ab >= -TOL, || format!("negative distance {ab}"));
                if dim == 1 {
                    match wasserstein1_1d(&a, &b) {
                        Ok(q) => s.close(q, ab, TOL, "quantile coupling vs transport LP"),
                        Err(e) => s.error(e),
                    }
                }
            }
            Err(e) => s.error(e),
        }
    }
    s
}

fn cvar_identities(cases: usize, perturbation: f64) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("cvar identities");
    let mut rng = generator(derive(SEED, 2));
    for _ in 0..cases {
        let len = rng.random_range(1..=12);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
        let alpha = rng.random_range(0.02..0.98);
        let shift = rng.random_range(-3.0..3.0);
        let scale = rng.random_range(0.1..4.0);
        let smaller_alpha = alpha * rng.random_range(0.1..1.0);
        let run = || -> drolab::Result<[f64; 6]> {
            let y = ScalarSample::uniform(values.clone())?;
            let shifted = ScalarSample::uniform(values.iter().map(|v| v + shift).collect())?;
            let scaled = ScalarSample::uniform(values.iter().map(|v| v * scale).collect())?;
            Ok([
                cvar_alpha(&y, alpha)?,
                cvar_alpha(&shifted, alpha)?,
                cvar_alpha(&scaled, alpha)?,
                var_alpha(&y, alpha)?,
                y.mean(),
                cvar_alpha(&y, smaller_alpha)?,
            ])
        };
        match run() {
            Ok([c, c_shift, c_scale, var, mean, c_small]) => {
                s.close(c_shift, c + shift + perturbation, TOL, "translation");
                s.close(c_scale, scale * c, TOL, "positive homogeneity");
                s.check(c >= var - TOL, || format!("CVaR {c} below VaR {var}"));
                s.check(c >= mean - TOL, || format!("CVaR {c} below mean {mean}"));
                s.check(c_small >= c - TOL, || {
                    format!("CVaR not decreasing in alpha: {c_small} < {c}")
                });
            }
            Err(e) => s.error(e),
        }
    }
    s
}

/// `F(x, ξ) = max(a_1 x ξ + b_1, a_2 ξ + b_2 x + c_2)` on `X = [0, 4]`,
/// `Ξ = [0, 2]`.
fn random_problem(rng: &mut impl Rng) -> ProblemSpec {
    let pieces = vec![
        BiAffinePiece {
            xi_matrix: vec![vec![rng.random_range(0.2..2.0)]],
            xi_offset: vec![0.0],
            x_coeffs: vec![0.0],
            constant: rng.random_range(-2.0..-0.5),
        },
        BiAffinePiece {
            xi_matrix: vec![vec![0.0]],
            xi_offset: vec![rng.random_range(-1.5..1.5)],
            x_coeffs: vec![rng.random_range(-0.5..0.5)],
            constant: rng.random_range(-3.0..-1.0),
        },
    ];
    let decision_set = DecisionSet {
        lower: vec![0.0],
        upper: vec![4.0],
        constraints: Vec::new(),
    };
    let support = BoxSet::interval(0.0, 2.0).expect("valid box");
    ProblemSpec::new(vec![-1.0], decision_set, pieces, rng.random_range(0.05..0.4), support).expect("valid problem")
}

fn zero_radius(cases: usize) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("zero-radius reductions");
    let mut rng = generator(derive(SEED, 3));
    let grid = GridConfig {
        initial_resolution: 21,
        refine_resolution: 11,
        rounds: 1,
    };
    for _ in 0..cases {
        let problem = random_problem(&mut rng);
        let atoms = rng.random_range(1..=6);
        let data = random_dist(&mut rng, atoms, 1, 0.0, 2.0);
        let x = [rng.random_range(0.0..4.0)];
        let t = rng.random_range(-2.0..2.0);
        let mut run = || -> drolab::Result<()> {
            let ball = AmbiguitySet::new(data.clone(), 0.0)?;
            let dr = solve_drrcp(&problem, &ball)?;
            let rcp = solve_rcp_reference(&problem, &data)?;
            s.check(dr.status == rcp.status, || {
                format!("status {:?} vs {:?}", dr.status, rcp.status)
            });
            if dr.is_optimal() && rcp.is_optimal() {
                s.close(dr.value, rcp.value, 1e-7, "DRRCP at zero radius vs RCP");
            }
            s.close(
                evaluate_vhat(&problem, &ball, &x, t)?,
                evaluate_v(&problem, &data, &x, t)?,
                TOL,
                "v-hat vs v",
            );
            let query = SafeSetQuery::new(&problem, &x)?;
            s.close(
                worst_case_prob_safe(&query, &ball)?,
                empirical_prob_safe(&query, &data),
                TOL,
                "safe probability",
            );
            let drc = solve_drccp(&problem, &ball, &grid)?;
            let ccp = solve_ccp_reference(&problem, &data, &grid)?;
            s.check(drc.status == ccp.status && drc.x == ccp.x, || {
                format!("DRCCP {:?} vs CCP {:?}", drc.x, ccp.x)
            });
            Ok(())
        };
        if let Err(e) = run() {
            s.error(e);
        }
    }
    s
}

/// Destinations for the transport oracle in one dimension: the roots of
/// every piece and the support endpoints, flagged when they lie in the
/// closure of the unsafe set, plus the LP projections of the atoms.
fn oracle_destinations(
    query: &SafeSetQuery<'_>,
    data: &EmpiricalDistribution,
) -> drolab::Result<Vec<(Vec<f64>, bool)>> {
    let problem = query.problem();
    let (lo, hi) = (problem.support.lower[0], problem.support.upper[0]);
    let mut candidates = vec![lo, hi];
    for (g, c) in problem.pieces_at(query.x()) {
        if g[0] != 0.0 {
            let r = -c / g[0];
            if (lo..=hi).contains(&r) {
                candidates.push(r);
            }
        }
    }
    let closure = |z: f64| {
        let h = 1e-9;
        query.value(&[z]) > 0.0 || query.value(&[(z - h).max(lo)]) > 0.0 || query.value(&[(z + h).min(hi)]) > 0.0
    };
    let mut out: Vec<(Vec<f64>, bool)> = candidates.into_iter().map(|z| (vec![z], closure(z))).collect();
    for p in data.points() {
        if let Some(z) = nearest_unsafe_point(query, p)? {
            out.push((z, true));
        }
    }
    Ok(out)
}

fn greedy_vs_oracle(cases: usize) -> SuiteOutcome {
    let mut s = SuiteOutcome::new("greedy vs transport oracle");
    let mut rng = generator(derive(SEED, 4));
    for _ in 0..cases {
        let problem = random_problem(&mut rng);
        let atoms = rng.random_range(1..=6);
        let data = random_dist(&mut rng, atoms, 1, 0.0, 2.0);
        let x = [rng.random_range(0.0..4.0)];
        let theta = rng.random_range(0.0..0.6);
        let run = || -> drolab::Result<(f64, f64)> {
            let query = SafeSetQuery::new(&problem, &x)?;
            let ball = AmbiguitySet::new(data.clone(), theta)?;
            let dests = oracle_destinations(&query, &data)?;
            Ok((
                worst_case_prob_safe(&query, &ball)?,
                transport_oracle_prob_safe(&query, &ball, &dests)?,
            ))
        };
        match run() {
            Ok((greedy, oracle)) => s.close(greedy, oracle, TOL, "worst-case safe probability"),
            Err(e) => s.error(e),
        }
    }
    s
}

/// Runs all suites with `perturbation` injected into the CVaR translation
/// check.
pub fn run_suites(perturbation: f64) -> Vec<SuiteOutcome> {
    vec![
        metric_axioms(60),
        cvar_identities(100, perturbation),
        zero_radius(30),
        greedy_vs_oracle(100),
    ]
}

pub fn cmd_selftest() -> u8 {
    let outcomes = run_suites(PERTURBATION);
    let mut ok = true;
    for o in &outcomes {
        println!(
            "{:<28} {:>4} passed {:>4} failed  {}",
            o.name,
            o.passed,
            o.failed,
            if o.failed == 0 { "PASS" } else { "FAIL" }
        );
        for f in &o.failures {
            println!("    {f}");
        }
        ok &= o.failed == 0;
    }
    if ok {
        crate::EXIT_OK
    } else {
        crate::EXIT_INPUT
    }
}
