use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EmpiricalDistribution;
use crate::error::{check_len, invalid, Result};
use crate::numeric::{stable_sum, WEIGHT_SUM_TOL};
use crate::seed::generator;
use crate::support::BoxSet;

/// Rejection attempts per draw before a truncated component is declared degenerate.
const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// Uniform on a sub-box of the support.
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Independent Gaussian coordinates conditioned on the support box.
    TruncatedGaussian { mean: Vec<f64>, std_dev: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedComponent {
    pub weight: f64,
    #[serde(flatten)]
    pub component: Component,
}

/// A data-generating distribution supported on a box Ξ: a single component
/// or a finite mixture of components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionModel {
    pub support: BoxSet,
    pub components: Vec<WeightedComponent>,
}

impl DistributionModel {
    pub fn new(support: BoxSet, components: Vec<WeightedComponent>) -> Result<Self> {
        let m = Self { support, components };
        m.validate()?;
        Ok(m)
    }

    /// Uniform on the whole support.
    pub fn uniform(support: BoxSet) -> Result<Self> {
        let component = Component::UniformBox {
            lower: support.lower.clone(),
            upper: support.upper.clone(),
        };
        Self::new(support, vec![WeightedComponent { weight: 1.0, component }])
    }

    pub fn truncated_gaussian(support: BoxSet, mean: Vec<f64>, std_dev: Vec<f64>) -> Result<Self> {
        let component = Component::TruncatedGaussian { mean, std_dev };
        Self::new(support, vec![WeightedComponent { weight: 1.0, component }])
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        if self.components.is_empty() {
            return Err(invalid("model needs at least one component"));
        }
        let total = stable_sum(self.components.iter().map(|c| c.weight));
        if self.components.iter().any(|c| !(c.weight > 0.0)) || (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid(format!(
                "mixture weights must be positive and sum to 1 (sum {total})"
            )));
        }
        let m = self.dim();
        for (k, wc) in self.components.iter().enumerate() {
            match &wc.component {
                Component::UniformBox { lower, upper } => {
                    let b = BoxSet::new(lower.clone(), upper.clone())
                        .map_err(|e| invalid(format!("component {k}: {e}")))?;
                    check_len("component dimension", m, b.dim())?;
                    if !self.support.contains(lower, 0.0) || !self.support.contains(upper, 0.0) {
                        return Err(invalid(format!("component {k} extends outside the support")));
                    }
                }
                Component::TruncatedGaussian { mean, std_dev } => {
                    check_len("component mean", m, mean.len())?;
                    check_len("component std_dev", m, std_dev.len())?;
                    if std_dev.iter().any(|s| !(*s > 0.0) || !s.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
                        return Err(invalid(format!("component {k}: std_dev must be positive and finite")));
                    }
                    let mass = gaussian_box_mass(mean, std_dev, &self.support.lower, &self.support.upper);
                    if !(mass > 1e-12) {
                        return Err(invalid(format!("component {k} has negligible mass inside the support")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability of the box `[lower, upper]` (intersected with the support).
    pub fn box_probability(&self, lower: &[f64], upper: &[f64]) -> f64 {
        stable_sum(
            self.components
                .iter()
                .map(|wc| wc.weight * component_mass(&wc.component, &self.support, lower, upper)),
        )
    }
}

fn gaussian_box_mass(mean: &[f64], std_dev: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    mean.iter()
        .zip(std_dev)
        .zip(lower.iter().zip(upper))
        .map(|((&mu, &sd), (&a, &b))| {
            let n = Normal::new(mu, sd).expect("validated std_dev");
            (n.cdf(b) - n.cdf(a)).max(0.0)
        })
        .product()
}

fn component_mass(c: &Component, support: &BoxSet, lower: &[f64], upper: &[f64]) -> f64 {
    let lo: Vec<f64> = lower.iter().zip(&support.lower).map(|(a, b)| a.max(*b)).collect();
    let hi: Vec<f64> = upper.iter().zip(&support.upper).map(|(a, b)| a.min(*b)).collect();
    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
        return 0.0;
    }
    match c {
        Component::UniformBox { lower: cl, upper: cu } => (0..lo.len())
            .map(|k| ((hi[k].min(cu[k]) - lo[k].max(cl[k])).max(0.0)) / (cu[k] - cl[k]))
            .product(),
        Component::TruncatedGaussian { mean, std_dev } => {
            gaussian_box_mass(mean, std_dev, &lo, &hi)
                / gaussian_box_mass(mean, std_dev, &support.lower, &support.upper)
        }
    }
}

/// `n` i.i.d. draws from `model`, fully determined by `seed`.
pub fn sample(model: &DistributionModel, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    model.validate()?;
    if n == 0 {
        return Err(invalid("sample size must be at least 1"));
    }
    let mut rng = generator(seed);
    let m = model.dim();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &model.components[model.components.len() - 1].component;
        for wc in &model.components {
            acc += wc.weight;
            if u < acc {
                chosen = &wc.component;
                break;
            }
        }
        let point = match chosen {
            Component::UniformBox { lower, upper } => (0..m)
                .map(|k| {
                    let u: f64 = rng.random();
                    (lower[k] + (upper[k] - lower[k]) * u).min(upper[k])
                })
                .collect(),
            Component::TruncatedGaussian { mean, std_dev } => {
                let mut attempts = 0;
                loop {
                    let p: Vec<f64> = (0..m)
                        .map(|k| {
                            let z: f64 = rng.sample(StandardNormal);
                            mean[k] + std_dev[k] * z
                        })
                        .collect();
                    if model.support.contains(&p, 0.0) {
                        break p;
                    }
                    attempts += 1;
                    if attempts >= MAX_REJECTIONS {
                        return Err(invalid("truncated Gaussian rejection sampling is not making progress"));
                    }
                }
            }
        };
        out.push(point);
    }
    Ok(out)
}

/// Midpoint-rule grid measure of `model` with `resolution` cells per axis.
/// Cells carrying no mass are dropped; supports dimension 1 and 2.
pub fn discretize(model: &DistributionModel, resolution: usize) -> Result<EmpiricalDistribution> {
    model.validate()?;
    let m = model.dim();
    if m > 2 {
        return Err(invalid(format!("grid discretization supports dimension ≤ 2, got {m}")));
    }
    if resolution < 2 {
        return Err(invalid("discretization resolution must be at least 2"));
    }
    let sup = &model.support;
    let h: Vec<f64> = (0..m).map(|k| sup.width(k) / resolution as f64).collect();
    let edge = |k: usize, i: usize| {
        if i == resolution {
            sup.upper[k]
        } else {
            sup.lower[k] + i as f64 * h[k]
        }
    };
    let cells = resolution.pow(m as u32);
    let mut points = Vec::with_capacity(cells);
    let mut weights = Vec::with_capacity(cells);
    for idx in 0..cells {
        let mut rem = idx;
        let mut lo = vec![0.0; m];
        let mut hi = vec![0.0; m];
        for k in (0..m).rev() {
            let i = rem % resolution;
            rem /= resolution;
            lo[k] = edge(k, i);
            hi[k] = edge(k, i + 1);
        }
        let w = model.box_probability(&lo, &hi);
        if w > 0.0 {
            points.push(lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect());
            weights.push(w);
        }
    }
    let total = stable_sum(weights.iter().copied());
    for w in &mut weights {
        *w /= total;
    }
    EmpiricalDistribution::new(points, weights)
}
