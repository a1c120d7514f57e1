use super::{solve_lp, LinearProgram, LpStatus};
use crate::error::{check_len, invalid, Error, Result};
use crate::numeric::check_probability_vector;

/// An optimal coupling and its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `plan[i][j]` is the mass moved from source atom `i` to target atom `j`.
    pub plan: Vec<Vec<f64>>,
    pub cost: f64,
}

/// Minimum-cost coupling between two discrete probability vectors.
///
/// Feasible couplings are the matrices with row sums `source` and column
/// sums `target`; the optimum is a vertex found by [`solve_lp`].
pub fn solve_transport(source: &[f64], target: &[f64], cost: &[Vec<f64>]) -> Result<TransportPlan> {
    check_probability_vector(source)?;
    check_probability_vector(target)?;
    check_len("cost rows", source.len(), cost.len())?;
    for row in cost {
        check_len("cost columns", target.len(), row.len())?;
        if row.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(invalid("transport costs must be finite and nonnegative"));
        }
    }
    let (ns, nt) = (source.len(), target.len());
    let var = |i: usize, j: usize| i * nt + j;

    let objective: Vec<f64> = cost.iter().flatten().copied().collect();
    let mut lp = LinearProgram::new(objective);
    for (i, &w) in source.iter().enumerate() {
        let mut row = vec![0.0; ns * nt];
        for j in 0..nt {
            row[var(i, j)] = 1.0;
        }
        lp.add_eq(row, w);
    }
    // The last column constraint is implied by the others.
    for (j, &w) in target.iter().enumerate().take(nt - 1) {
        let mut row = vec![0.0; ns * nt];
        for i in 0..ns {
            row[var(i, j)] = 1.0;
        }
        lp.add_eq(row, w);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "transport LP ended with status {:?}",
            sol.status
        )));
    }
    let plan: Vec<Vec<f64>> = sol.point.chunks(nt).map(|c| c.to_vec()).collect();
    let cost_value = plan
        .iter()
        .zip(cost)
        .map(|(p, c)| p.iter().zip(c).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    Ok(TransportPlan { plan, cost: cost_value })
}
