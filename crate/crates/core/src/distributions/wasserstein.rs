use super::EmpiricalDistribution;
use crate::error::{check_len, invalid, Result};
use crate::lp::solve_transport;
use crate::support::l1_distance;

/// The pair in a fixed order, so that swapping the arguments repeats the
/// same floating-point operations and symmetry holds bit for bit.
fn canonical<'a>(
    mu: &'a EmpiricalDistribution,
    nu: &'a EmpiricalDistribution,
) -> (&'a EmpiricalDistribution, &'a EmpiricalDistribution) {
    let key = |d: &'a EmpiricalDistribution| d.points().iter().flatten().chain(d.weights()).copied();
    let order = mu.len().cmp(&nu.len()).then_with(|| {
        key(mu)
            .zip(key(nu))
            .map(|(a, b)| a.total_cmp(&b))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if order.is_gt() {
        (nu, mu)
    } else {
        (mu, nu)
    }
}

/// W1 under the ℓ1 ground metric, as the optimal value of the transport LP.
pub fn wasserstein1(mu: &EmpiricalDistribution, nu: &EmpiricalDistribution) -> Result<f64> {
    check_len("distribution dimension", mu.dim(), nu.dim())?;
    let (mu, nu) = canonical(mu, nu);
    let cost: Vec<Vec<f64>> = mu
        .points()
        .iter()
        .map(|a| nu.points().iter().map(|b| l1_distance(a, b)).collect())
        .collect();
    Ok(solve_transport(mu.weights(), nu.weights(), &cost)?.cost.max(0.0))
}

/// W1 on the real line by the monotone (quantile) coupling: both measures are
/// sorted and mass is consumed in order, so the result is the integral of
/// `|F_μ⁻¹(u) − F_ν⁻¹(u)|` over the merged weight breakpoints.
pub fn wasserstein1_1d(mu: &EmpiricalDistribution, nu: &EmpiricalDistribution) -> Result<f64> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(invalid(format!(
            "one-dimensional W1 needs 1-D measures, got dimensions {} and {}",
            mu.dim(),
            nu.dim()
        )));
    }
    let sorted = |d: &EmpiricalDistribution| {
        let mut v: Vec<(f64, f64)> = d.iter().map(|(p, w)| (p[0], w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (mu, nu) = canonical(mu, nu);
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        total += m * (a[i].0 - b[j].0).abs();
        ra -= m;
        rb -= m;
        // Leftover mass below 1e-15 is rounding in the weights.
        if ra <= 1e-15 {
            i += 1;
            if i < a.len() {
                ra += a[i].1;
            }
        }
        if rb <= 1e-15 {
            j += 1;
            if j < b.len() {
                rb += b[j].1;
            }
        }
    }
    Ok(total)
}

/// The quantile coupling in one dimension, the transport LP otherwise.
pub fn wasserstein1_auto(mu: &EmpiricalDistribution, nu: &EmpiricalDistribution) -> Result<f64> {
    check_len("distribution dimension", mu.dim(), nu.dim())?;
    if mu.dim() == 1 {
        wasserstein1_1d(mu, nu)
    } else {
        wasserstein1(mu, nu)
    }
}
