//! Symmetric positive-definite factorizations with diagonal jitter fallback.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter scale applied on the first failed factorization.
const JITTER_SCALE: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

/// Cholesky factor of an SPD matrix, possibly with a jitter added to its diagonal.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    /// Factorizes `m`. On failure, adds `1e-10 * trace/d` to the diagonal and
    /// retries up to three times, growing the jitter tenfold each time.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { attempts: 0 });
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let d = m.nrows().max(1) as f64;
        let mut jitter = JITTER_SCALE * (m.trace().abs() / d).max(f64::MIN_POSITIVE);
        for _ in 0..JITTER_RETRIES {
            let mut shifted = m.clone();
            for i in 0..m.nrows() {
                shifted[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(Self { chol, jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::NotPositiveDefinite { attempts: JITTER_RETRIES + 1 })
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor `L` with `L Lᵀ = M`.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// `M⁻¹` via the factor.
    pub fn inverse(&self) -> DMatrix<f64> {
        symmetrize(self.chol.inverse())
    }

    /// `bᵀ M⁻¹ b` computed as `‖L⁻¹ b‖²`.
    pub fn inv_quad(&self, b: &DVector<f64>) -> f64 {
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a non-zero diagonal");
        w.norm_squared()
    }
}

/// Averages `m` with its transpose to remove round-off asymmetry.
pub fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}

/// Least-squares solution of `Z θ ≈ y` via SVD.
pub fn least_squares(z: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = z.clone().svd(true, true);
    svd.solve(y, 1e-12)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))
}

/// Sampling factor for a covariance that may be singular (e.g. zero).
///
/// Uses the Cholesky factor when it exists and falls back to a symmetric
/// eigen-decomposition with negative eigenvalues clamped to zero.
pub fn covariance_root(cov: &DMatrix<f64>) -> DMatrix<f64> {
    if cov.iter().all(|v| *v == 0.0) {
        return DMatrix::zeros(cov.nrows(), cov.ncols());
    }
    if let Some(chol) = Cholesky::new(cov.clone()) {
        return chol.l();
    }
    let eig = symmetrize(cov.clone()).symmetric_eigen();
    let mut root = eig.eigenvectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        root.column_mut(j).scale_mut(s);
    }
    root
}
