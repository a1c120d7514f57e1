use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};

/// Axis-aligned box `{ξ : lower ≤ ξ ≤ upper}` with positive width on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn validate(&self) -> Result<()> {
        check_len("box upper bounds", self.lower.len(), self.upper.len())?;
        if self.lower.is_empty() {
            return Err(invalid("box must have at least one axis"));
        }
        for (k, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(invalid(format!("box axis {k} must have finite bounds")));
            }
            if lo >= hi {
                return Err(invalid(format!("box axis {k} has zero or negative width [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    /// ℓ1 diameter.
    pub fn diameter(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).sum()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
