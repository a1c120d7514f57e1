//! Discrete measures, data-generating models, Wasserstein-1 distances and
//! radius schedules.

mod model;
mod schedule;
mod wasserstein;

pub use model::{discretize, sample, Component, DistributionModel, WeightedComponent};
pub use schedule::RadiusSchedule;
pub use wasserstein::{wasserstein1, wasserstein1_1d, wasserstein1_auto};

use std::io::{Read, Write};

use crate::error::{check_len, invalid, Error, Result};
use crate::numeric::{check_probability_vector, stable_sum};
use crate::support::BoxSet;

/// Tolerance used when checking that atoms lie in a support box.
pub const SUPPORT_TOL: f64 = 1e-12;

/// A weighted discrete measure `Σ wᵢ δ_{ξᵢ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("a distribution needs at least one atom"));
        }
        check_len("weights", points.len(), weights.len())?;
        let m = points[0].len();
        if m == 0 {
            return Err(invalid("atoms must have at least one coordinate"));
        }
        for p in &points {
            check_len("atom dimension", m, p.len())?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid("atom coordinates must be finite"));
            }
        }
        check_probability_vector(&weights)?;
        Ok(Self { points, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(point: Vec<f64>) -> Result<Self> {
        Self::new(vec![point], vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.iter().map(Vec::as_slice).zip(self.weights.iter().copied())
    }

    /// `E[f(ξ)]`.
    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        stable_sum(self.iter().map(|(p, w)| w * f(p)))
    }

    pub fn check_support(&self, support: &BoxSet) -> Result<()> {
        check_len("support dimension", support.dim(), self.dim())?;
        match self.points.iter().position(|p| !support.contains(p, SUPPORT_TOL)) {
            Some(index) => Err(Error::OutsideSupport { index }),
            None => Ok(()),
        }
    }

    /// Same measure with duplicate atoms merged and atoms sorted
    /// lexicographically; zero-weight atoms are dropped.
    pub fn merged(&self) -> Self {
        let mut atoms: Vec<(Vec<f64>, f64)> = self
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(p, w)| (p.to_vec(), w))
            .collect();
        atoms.sort_by(|a, b| {
            a.0.iter()
                .zip(&b.0)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut points: Vec<Vec<f64>> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (p, w) in atoms {
            match points.last() {
                Some(last) if *last == p => *weights.last_mut().unwrap() += w,
                _ => {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
        Self { points, weights }
    }

    /// First `n` atoms with weights renormalized to `1/n`.
    pub fn uniform_prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(invalid(format!("prefix length {n} out of range 1..={}", self.len())));
        }
        Self::uniform(self.points[..n].to_vec())
    }

    /// Reads the `w, xi_1..xi_m` CSV layout.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || &headers[0] != "w" {
            return Err(invalid("distribution CSV header must start with `w`"));
        }
        for (k, h) in headers.iter().enumerate().skip(1) {
            if h != format!("xi_{k}") {
                return Err(invalid(format!(
                    "distribution CSV column {} must be `xi_{k}`, found `{h}`",
                    k + 1
                )));
            }
        }
        if headers.len() < 2 {
            return Err(invalid("distribution CSV needs at least one `xi_k` column"));
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| invalid(format!("row {}: cannot parse `{s}` as a number", line + 2)))
            };
            check_len("CSV row width", headers.len(), record.len())?;
            weights.push(parse(&record[0])?);
            points.push(record.iter().skip(1).map(parse).collect::<Result<Vec<f64>>>()?);
        }
        Self::new(points, weights)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["w".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("xi_{k}")));
        wtr.write_record(&header)?;
        for (p, w) in self.iter() {
            let mut row = vec![w.to_string()];
            row.extend(p.iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Uniform empirical measure of `samples`, validated against `support`.
pub fn empirical_from_samples(samples: &[Vec<f64>], support: &BoxSet) -> Result<EmpiricalDistribution> {
    let dist = EmpiricalDistribution::uniform(samples.to_vec())?;
    dist.check_support(support)?;
    Ok(dist)
}

/// The Wasserstein-1 ball `{Q : W1(Q, center) ≤ radius}` under the ℓ1 ground metric.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    center: EmpiricalDistribution,
    radius: f64,
}

impl AmbiguitySet {
    pub fn new(center: EmpiricalDistribution, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(invalid(format!("radius must be finite and nonnegative, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn singleton(center: EmpiricalDistribution) -> Self {
        Self { center, radius: 0.0 }
    }

    pub fn center(&self) -> &EmpiricalDistribution {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        Self::new(self.center.clone(), radius)
    }

    /// Whether `q` lies in the ball.
    pub fn contains(&self, q: &EmpiricalDistribution) -> Result<bool> {
        Ok(wasserstein1_auto(q, &self.center)? <= self.radius + 1e-12)
    }
}
