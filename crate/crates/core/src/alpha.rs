use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Search interval for the temperature, stored as α/n ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for AlphaBounds {
    fn default() -> Self {
        Self { lo: 0.0, hi: 3.0 }
    }
}

impl AlphaBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo < 0.0 || self.hi <= self.lo {
            return Err(Error::InvalidInput(format!(
                "alpha bounds need 0 <= lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    /// Unnormalized interval `[lo·n, hi·n]`.
    pub fn scaled(&self, n: usize) -> (f64, f64) {
        (self.lo * n as f64, self.hi * n as f64)
    }

    pub fn clip(&self, alpha: f64, n: usize) -> f64 {
        let (lo, hi) = self.scaled(n);
        alpha.clamp(lo, hi)
    }

    /// `points` evenly spaced α values from `lo·n` to `hi·n` inclusive.
    pub fn grid(&self, n: usize, points: usize) -> Vec<f64> {
        let (lo, hi) = self.scaled(n);
        linspace(lo, hi, points)
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            let mut v: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
            v[points - 1] = hi;
            v
        }
    }
}

/// A chosen temperature and the oracle risk it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub alpha: f64,
    pub alpha_over_n: f64,
    pub oracle_risk: f64,
    pub wall_time_ms: u64,
}

impl StrategyOutcome {
    pub fn new(alpha: f64, n: usize, oracle_risk: f64, wall_time_ms: u64) -> Self {
        Self { alpha, alpha_over_n: alpha / n as f64, oracle_risk, wall_time_ms }
    }
}
