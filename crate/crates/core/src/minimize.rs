//! Bounded scalar minimization: bracketing grid plus golden-section refinement.

use crate::error::Result;

pub const DEFAULT_GRID: usize = 200;
/// Refinement stops when the bracket width divided by n drops below this.
pub const DEFAULT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Minimizes `f` on `[lo, hi]`.
///
/// Evaluates `grid` evenly spaced points, keeps the smallest value (ties go
/// to the smaller x), then golden-section refines inside the neighbouring
/// grid cells until the bracket is narrower than `tol·scale`. The refined point
/// replaces the grid point only when it is strictly better.
pub fn minimize_bounded<F>(mut f: F, lo: f64, hi: f64, grid: usize, tol: f64, scale: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let xs = crate::alpha::linspace(lo, hi, grid.max(2));
    let mut vals = Vec::with_capacity(xs.len());
    for &x in &xs {
        vals.push(f(x)?);
    }
    let mut best = 0;
    for i in 1..xs.len() {
        if vals[i] < vals[best] && !ties(vals[i], vals[best]) {
            best = i;
        }
    }
    let grid_min = Minimum { x: xs[best], value: vals[best] };
    if xs.len() < 3 || lo == hi {
        return Ok(grid_min);
    }
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(xs.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) / scale > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let refined = if fc <= fd { Minimum { x: c, value: fc } } else { Minimum { x: d, value: fd } };
    if refined.value < grid_min.value && !ties(refined.value, grid_min.value) {
        Ok(refined)
    } else {
        Ok(grid_min)
    }
}

/// [`minimize_bounded`] over `[lo·n, hi·n]` with the default grid and tolerance in α/n.
pub fn minimize_alpha<F>(f: F, lo: f64, hi: f64, n: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    minimize_bounded(f, lo, hi, DEFAULT_GRID, DEFAULT_TOL, n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let m = minimize_alpha(|a| Ok((a / 10.0 - 1.234).powi(2)), 0.0, 30.0, 10).unwrap();
        assert!((m.x / 10.0 - 1.234).abs() < 1e-5);
    }

    #[test]
    fn decreasing_function_returns_upper_endpoint_exactly() {
        let m = minimize_alpha(|a| Ok(1.0 / (1.0 + a)), 0.0, 60.0, 20).unwrap();
        assert_eq!(m.x, 60.0);
    }

    #[test]
    fn flat_function_returns_lower_endpoint() {
        let m = minimize_alpha(|_| Ok(2.0), 0.0, 60.0, 20).unwrap();
        assert_eq!(m.x, 0.0);
    }

    #[test]
    fn increasing_function_returns_lower_endpoint() {
        let m = minimize_alpha(|a| Ok(a * a), 3.0, 60.0, 20).unwrap();
        assert_eq!(m.x, 3.0);
    }
}
