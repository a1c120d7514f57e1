//! Empirical and worst-case probabilities of the safe set
//! `H(x) = {ξ ∈ Ξ : F(x, ξ) ≤ 0}`.
//!
//! The adversary moves mass into the closure of `{F(x,·) > 0} ∩ Ξ`. A piece
//! whose maximum over Ξ is `≤ 0` never contributes a strictly unsafe point and
//! is left out of the distance computation.

use crate::distributions::{AmbiguitySet, EmpiricalDistribution};
use crate::error::{check_len, Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::numeric::stable_sum;
use crate::problem::ProblemSpec;

/// How per-piece ℓ1 distances to `{g ≥ 0} ∩ Ξ` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMethod {
    /// One LP per piece.
    Lp,
    /// Greedy fill of the deficit along the coordinates with the largest
    /// `|a_j|`, which is the exact solution of the knapsack-shaped LP.
    #[default]
    Greedy,
}

/// `H(x)` for a fixed decision, with the pieces of `F(x, ·)` precomputed.
#[derive(Debug, Clone)]
pub struct SafeSetQuery<'a> {
    problem: &'a ProblemSpec,
    x: Vec<f64>,
    pieces: Vec<(Vec<f64>, f64)>,
    reachable: Vec<bool>,
}

impl<'a> SafeSetQuery<'a> {
    pub fn new(problem: &'a ProblemSpec, x: &[f64]) -> Result<Self> {
        problem.check_decision(x)?;
        let pieces = problem.pieces_at(x);
        let reachable = pieces
            .iter()
            .map(|(a, b)| {
                let top: f64 = a
                    .iter()
                    .enumerate()
                    .map(|(j, g)| (g * problem.support.lower[j]).max(g * problem.support.upper[j]))
                    .sum();
                top + b > 0.0
            })
            .collect();
        Ok(Self {
            problem,
            x: x.to_vec(),
            pieces,
            reachable,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        self.problem
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn value(&self, xi: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|(a, b)| a.iter().zip(xi).map(|(g, v)| g * v).sum::<f64>() + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_safe(&self, xi: &[f64]) -> bool {
        self.value(xi) <= 0.0
    }
}

/// Mass of atoms with `F(x, ξᵢ) ≤ 0`.
pub fn empirical_prob_safe(query: &SafeSetQuery<'_>, dist: &EmpiricalDistribution) -> f64 {
    stable_sum(dist.iter().filter(|(p, _)| query.is_safe(p)).map(|(_, w)| w)).clamp(0.0, 1.0)
}

fn piece_distance_lp(query: &SafeSetQuery<'_>, k: usize, point: &[f64]) -> Result<f64> {
    Ok(piece_projection_lp(query, k, point)?.map_or(f64::INFINITY, |(d, _)| d))
}

/// `(distance, nearest point)` in `{g_k ≥ 0} ∩ Ξ`, or `None` when empty.
fn piece_projection_lp(query: &SafeSetQuery<'_>, k: usize, point: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    let support = &query.problem.support;
    let m = point.len();
    let (a, b) = &query.pieces[k];
    let mut obj = vec![0.0; m];
    obj.extend(std::iter::repeat_n(1.0, m));
    let mut lower = support.lower.clone();
    let mut upper = support.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut lp = LinearProgram::new(obj).with_bounds(lower, upper);
    for j in 0..m {
        let mut row = vec![0.0; 2 * m];
        row[j] = 1.0;
        row[m + j] = -1.0;
        lp.add_le(row.clone(), point[j]);
        row[j] = -1.0;
        lp.add_le(row, -point[j]);
    }
    let mut row = a.clone();
    row.extend(std::iter::repeat_n(0.0, m));
    lp.add_ge(row, -b);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some((sol.value.max(0.0), sol.point[..m].to_vec()))),
        LpStatus::Infeasible => Ok(None),
        status => Err(Error::Solver(format!("distance LP ended with {status:?}"))),
    }
}

fn piece_distance_greedy(query: &SafeSetQuery<'_>, k: usize, point: &[f64]) -> f64 {
    let support = &query.problem.support;
    let (a, b) = &query.pieces[k];
    let mut deficit = -(a.iter().zip(point).map(|(g, v)| g * v).sum::<f64>() + b);
    if deficit <= 0.0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..a.len()).filter(|&j| a[j] != 0.0).collect();
    order.sort_by(|&i, &j| a[j].abs().total_cmp(&a[i].abs()).then(i.cmp(&j)));
    let mut dist = 0.0;
    for j in order {
        let room = if a[j] > 0.0 {
            support.upper[j] - point[j]
        } else {
            point[j] - support.lower[j]
        };
        let step = room.max(0.0).min(deficit / a[j].abs());
        dist += step;
        deficit -= step * a[j].abs();
        if deficit <= 0.0 {
            return dist;
        }
    }
    // leftover deficit at rounding level means the target was reached at a corner
    if deficit <= 1e-12 * (1.0 + b.abs()) {
        dist
    } else {
        f64::INFINITY
    }
}

/// ℓ1 distance from `point` to the closed unsafe set, by LP; `+∞` when no
/// point of Ξ is strictly unsafe.
pub fn distance_to_unsafe(query: &SafeSetQuery<'_>, point: &[f64]) -> Result<f64> {
    distance_to_unsafe_with(query, point, DistanceMethod::Lp)
}

pub fn distance_to_unsafe_with(query: &SafeSetQuery<'_>, point: &[f64], method: DistanceMethod) -> Result<f64> {
    check_len("point dimension", query.problem.m(), point.len())?;
    if query.value(point) > 0.0 {
        return Ok(0.0);
    }
    let mut best = f64::INFINITY;
    for k in 0..query.pieces.len() {
        if !query.reachable[k] {
            continue;
        }
        let d = match method {
            DistanceMethod::Lp => piece_distance_lp(query, k, point)?,
            DistanceMethod::Greedy => piece_distance_greedy(query, k, point),
        };
        best = best.min(d);
    }
    Ok(best)
}

/// Nearest point of the closed unsafe set to `point`, by LP; `None` when no
/// point of Ξ is strictly unsafe.
pub fn nearest_unsafe_point(query: &SafeSetQuery<'_>, point: &[f64]) -> Result<Option<Vec<f64>>> {
    check_len("point dimension", query.problem.m(), point.len())?;
    if query.value(point) > 0.0 {
        return Ok(Some(point.to_vec()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..query.pieces.len() {
        if !query.reachable[k] {
            continue;
        }
        if let Some((d, z)) = piece_projection_lp(query, k, point)? {
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, z));
            }
        }
    }
    Ok(best.map(|(_, z)| z))
}

/// `1 − max` unsafe mass over transport plans from the center atoms to the
/// given destinations with ℓ1 cost at most θ. Destinations flagged `true`
/// count as unsafe; each atom may also stay where it is. With destinations
/// covering all optimal targets this is the exact worst-case probability.
pub fn transport_oracle_prob_safe(
    query: &SafeSetQuery<'_>,
    ambiguity: &AmbiguitySet,
    destinations: &[(Vec<f64>, bool)],
) -> Result<f64> {
    let center = ambiguity.center();
    let mut targets: Vec<(Vec<f64>, bool)> = center.points().iter().map(|p| (p.clone(), !query.is_safe(p))).collect();
    targets.extend(destinations.iter().cloned());
    let (na, nt) = (center.len(), targets.len());
    let mut obj = vec![0.0; na * nt];
    let mut budget = vec![0.0; na * nt];
    for (i, p) in center.points().iter().enumerate() {
        for (j, (z, unsafe_)) in targets.iter().enumerate() {
            if *unsafe_ {
                obj[i * nt + j] = -1.0;
            }
            budget[i * nt + j] = p.iter().zip(z).map(|(a, b)| (a - b).abs()).sum();
        }
    }
    let mut lp = LinearProgram::new(obj);
    for (i, w) in center.weights().iter().enumerate() {
        let mut row = vec![0.0; na * nt];
        row[i * nt..(i + 1) * nt].iter_mut().for_each(|v| *v = 1.0);
        lp.add_eq(row, *w);
    }
    lp.add_le(budget, ambiguity.radius());
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!(
            "transport oracle LP ended with {:?}",
            sol.status
        )));
    }
    Ok((1.0 + sol.value).clamp(0.0, 1.0))
}

/// `inf_{Q ∈ ball} Q(F(x, ξ) ≤ 0)`, by moving the cheapest safe mass first.
pub fn worst_case_prob_safe(query: &SafeSetQuery<'_>, ambiguity: &AmbiguitySet) -> Result<f64> {
    worst_case_prob_safe_with(query, ambiguity, DistanceMethod::Greedy)
}

pub fn worst_case_prob_safe_with(
    query: &SafeSetQuery<'_>,
    ambiguity: &AmbiguitySet,
    method: DistanceMethod,
) -> Result<f64> {
    let center = ambiguity.center();
    check_len("distribution dimension", query.problem.m(), center.dim())?;
    let safe = empirical_prob_safe(query, center);
    if ambiguity.radius() == 0.0 {
        return Ok(safe);
    }
    let mut moves: Vec<(f64, usize, f64)> = Vec::new();
    for (i, (p, w)) in center.iter().enumerate() {
        if w > 0.0 && query.is_safe(p) {
            let d = distance_to_unsafe_with(query, p, method)?;
            if d.is_finite() {
                moves.push((d, i, w));
            }
        }
    }
    moves.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut budget = ambiguity.radius();
    let mut moved = Vec::with_capacity(moves.len());
    for (d, _, w) in moves {
        if d == 0.0 {
            moved.push(w);
            continue;
        }
        let take = w.min(budget / d);
        moved.push(take);
        budget -= take * d;
        if take < w {
            break;
        }
    }
    Ok((safe - stable_sum(moved)).clamp(0.0, 1.0))
}
