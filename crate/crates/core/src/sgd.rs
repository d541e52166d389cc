//! Projected stochastic gradient descent over the scalar temperature.

use serde::{Deserialize, Serialize};

use crate::alpha::AlphaBounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    /// Base step is `eta0_scale · n²`, so one unit of gradient moves α/n by
    /// `eta0_scale` on the first iteration.
    pub eta0_scale: f64,
    pub max_iters: usize,
    /// Stop once `|Δα|/n` falls below this value.
    pub tol: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self { eta0_scale: 0.5, max_iters: 200, tol: 1e-4 }
    }
}

impl SgdConfig {
    pub fn eta0(&self, n: usize) -> f64 {
        self.eta0_scale * (n as f64) * (n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0_scale > 0.0 && self.eta0_scale.is_finite()) {
            return Err(Error::InvalidInput("sgd eta0_scale must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("sgd max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidInput("sgd tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Iterates `α ← clip(α − η_t·grad(α))` with `η_t = η_0/√t`.
///
/// `grad` receives the current α and the 1-based iteration index.
pub fn sgd_over_alpha<G>(
    mut grad: G,
    alpha_init: f64,
    bounds: &AlphaBounds,
    n: usize,
    cfg: &SgdConfig,
) -> Result<f64>
where
    G: FnMut(f64, usize) -> Result<f64>,
{
    cfg.validate()?;
    let eta0 = cfg.eta0(n);
    let mut alpha = bounds.clip(alpha_init, n);
    for t in 1..=cfg.max_iters {
        let g = grad(alpha, t)?;
        if !g.is_finite() {
            return Err(Error::NonFiniteGradient { iteration: t, value: g });
        }
        let next = bounds.clip(alpha - eta0 / (t as f64).sqrt() * g, n);
        let step = (next - alpha).abs() / n as f64;
        alpha = next;
        if step < cfg.tol {
            break;
        }
    }
    Ok(alpha)
}
