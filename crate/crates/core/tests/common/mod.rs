//! Brute-force oracles and instance generators shared by the integration
//! tests. Nothing here calls the closed-form routes under test.

#![allow(dead_code)]

use drolab::chance::{nearest_unsafe_point, SafeSetQuery};
use drolab::distributions::EmpiricalDistribution;
use drolab::lp::{solve_lp, LinearProgram};
use drolab::problem::{BiAffinePiece, DecisionSet, ProblemSpec};
use drolab::support::BoxSet;
use rand::Rng;

/// `F = xξ − 1`, `X = [0, 10]`, `Ξ = [0, 2]`.
pub fn p1(alpha: f64) -> ProblemSpec {
    ProblemSpec::scalar_budget(alpha).unwrap()
}

pub fn random_dist(rng: &mut impl Rng, atoms: usize, dim: usize, lo: f64, hi: f64) -> EmpiricalDistribution {
    let points = (0..atoms)
        .map(|_| (0..dim).map(|_| rng.random_range(lo..hi)).collect())
        .collect();
    let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    EmpiricalDistribution::new(points, raw.iter().map(|w| w / total).collect()).unwrap()
}

/// Two pieces on `X = [0, 4]`, `Ξ = [0, 2]^m`: one growing with `x·ξ`, one
/// affine in `ξ` and `x` separately.
pub fn random_problem(rng: &mut impl Rng, m: usize) -> ProblemSpec {
    let pieces = vec![
        BiAffinePiece {
            xi_matrix: (0..m).map(|_| vec![rng.random_range(0.2..2.0)]).collect(),
            xi_offset: vec![0.0; m],
            x_coeffs: vec![0.0],
            constant: rng.random_range(-2.0..-0.5),
        },
        BiAffinePiece {
            xi_matrix: vec![vec![0.0]; m],
            xi_offset: (0..m).map(|_| rng.random_range(-1.5..1.5)).collect(),
            x_coeffs: vec![rng.random_range(-0.5..0.5)],
            constant: rng.random_range(-3.0..-1.0),
        },
    ];
    let decision_set = DecisionSet {
        lower: vec![0.0],
        upper: vec![4.0],
        constraints: Vec::new(),
    };
    let support = BoxSet::new(vec![0.0; m], vec![2.0; m]).unwrap();
    ProblemSpec::new(vec![-1.0], decision_set, pieces, rng.random_range(0.05..0.4), support).unwrap()
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of the objective over all basic feasible points of an LP with
/// finite bounds and no equality rows; `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    assert!(lp.equality_lhs.is_empty());
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .inequality_lhs
        .iter()
        .cloned()
        .zip(lp.inequality_rhs.iter().copied())
        .collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        rows.push((e.clone(), lp.upper_bounds[j]));
        e[j] = -1.0;
        rows.push((e, -lp.lower_bounds[j]));
    }
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let a = subset.iter().map(|&i| rows[i].0.clone()).collect();
        let b = subset.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = rows
                .iter()
                .all(|(r, h)| r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-9 * (1.0 + h.abs()));
            if feasible {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next n-subset in lexicographic order
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if subset[k] < rows.len() - n + k {
                break;
            }
        }
        subset[k] += 1;
        for i in k + 1..n {
            subset[i] = subset[i - 1] + 1;
        }
    }
}

/// `sup` of `CVaR_α(F(x, ξ))` over measures obtained by moving the atoms of
/// `center` onto `grid` (1-D) with ℓ1 cost at most θ, using
/// `CVaR_α(Q) = max { E_q[Y] : 0 ≤ q ≤ Q/α, Σq = 1 }`.
pub fn sup_cvar_over_grid(
    problem: &ProblemSpec,
    center: &EmpiricalDistribution,
    theta: f64,
    x: &[f64],
    grid: &[f64],
) -> f64 {
    let (na, ng) = (center.len(), grid.len());
    let nv = na * ng + ng;
    let y: Vec<f64> = grid.iter().map(|g| problem.constraint_value(x, &[*g])).collect();
    let mut obj = vec![0.0; nv];
    for j in 0..ng {
        obj[na * ng + j] = -y[j];
    }
    let mut lp = LinearProgram::new(obj);
    for (i, w) in center.weights().iter().enumerate() {
        let mut row = vec![0.0; nv];
        row[i * ng..(i + 1) * ng].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(row, *w);
    }
    let mut budget = vec![0.0; nv];
    for (i, p) in center.points().iter().enumerate() {
        for (j, g) in grid.iter().enumerate() {
            budget[i * ng + j] = (p[0] - g).abs();
        }
    }
    lp.add_le(budget, theta);
    for j in 0..ng {
        let mut row = vec![0.0; nv];
        row[na * ng + j] = 1.0;
        for i in 0..na {
            row[i * ng + j] = -1.0 / problem.alpha;
        }
        lp.add_le(row, 0.0);
    }
    let mut total = vec![0.0; nv];
    total[na * ng..].iter_mut().for_each(|v| *v = 1.0);
    lp.add_eq(total, 1.0);
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal(), "{:?}", sol.status);
    -sol.value
}

/// Destinations for the transport oracle: LP projections of every atom onto
/// the closed unsafe set and, in one dimension, the roots of every piece and
/// the support endpoints, flagged when they lie in the closure of the unsafe
/// set.
pub fn oracle_destinations(query: &SafeSetQuery<'_>, data: &EmpiricalDistribution) -> Vec<(Vec<f64>, bool)> {
    let problem = query.problem();
    let mut out = Vec::new();
    if problem.m() == 1 {
        let (lo, hi) = (problem.support.lower[0], problem.support.upper[0]);
        let mut candidates = vec![lo, hi];
        for (g, c) in problem.pieces_at(query.x()) {
            if g[0] != 0.0 && (lo..=hi).contains(&(-c / g[0])) {
                candidates.push(-c / g[0]);
            }
        }
        let h = 1e-9;
        for z in candidates {
            let closure = query.value(&[z]) > 0.0
                || query.value(&[(z - h).max(lo)]) > 0.0
                || query.value(&[(z + h).min(hi)]) > 0.0;
            out.push((vec![z], closure));
        }
    }
    for p in data.points() {
        if let Some(z) = nearest_unsafe_point(query, p).unwrap() {
            out.push((z, true));
        }
    }
    out
}

/// Lipschitz constant of `ξ ↦ max_k (g_k·ξ + c_k)` under ℓ1, from the raw
/// gradients.
pub fn max_abs_gradient(gradients: &[Vec<f64>]) -> f64 {
    gradients.iter().flatten().fold(0.0, |a, g| a.max(g.abs()))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}
