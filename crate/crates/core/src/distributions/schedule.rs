use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Confidence and radius sequences `(β_N, ε_N)`.
///
/// `β_N = N^{-p}` and `ε_N = C · (p·ln(max(N, 3)) / N)^{1/max(m, 2)}`. For
/// `N ≥ 3` the radius is `C · (ln(1/β_N)/N)^{1/max(m,2)}`; clamping the log
/// argument at 3 keeps the sequence strictly decreasing for `N = 1, 2`, where
/// `ln N / N` is still increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSchedule {
    /// `p > 1`, so that `Σ β_N` converges.
    pub confidence_exponent: f64,
    /// `C > 0`.
    pub scale: f64,
    /// Dimension `m` of the uncertainty.
    pub dimension: usize,
}

impl Default for RadiusSchedule {
    fn default() -> Self {
        Self {
            confidence_exponent: 2.0,
            scale: 1.0,
            dimension: 1,
        }
    }
}

impl RadiusSchedule {
    pub fn new(confidence_exponent: f64, scale: f64, dimension: usize) -> Result<Self> {
        let s = Self {
            confidence_exponent,
            scale,
            dimension,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_exponent > 1.0) || !self.confidence_exponent.is_finite() {
            return Err(invalid(format!(
                "confidence exponent must exceed 1, got {}",
                self.confidence_exponent
            )));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(invalid(format!("radius scale must be positive, got {}", self.scale)));
        }
        if self.dimension == 0 {
            return Err(invalid("schedule dimension must be at least 1"));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.dimension.max(2) as f64
    }

    /// `(ε_N, β_N)`; `n` must be at least 1.
    pub fn radius(&self, n: u64) -> (f64, f64) {
        let n = n.max(1) as f64;
        let beta = n.powf(-self.confidence_exponent);
        let eps = self.scale * (self.confidence_exponent * n.max(3.0).ln() / n).powf(self.rate());
        (eps, beta)
    }
}
