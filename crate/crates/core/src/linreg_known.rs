//! Linear regression with a known noise variance and a Gaussian prior.
//!
//! The α-posterior is Gaussian with
//! `S_P = (c·ZᵀZ + S_0⁻¹)⁻¹`, `μ_P = S_P(c·ZᵀY + S_0⁻¹μ_0)`, `c = α/(σ²m)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SufficientStats};
use crate::error::{Error, Result};
use crate::linalg::{covariance_root, symmetrize, SpdFactor};
use crate::random::normal_vec;

/// Gaussian prior `N(μ_0, S_0)` with its precision cached.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    precision: DMatrix<f64>,
    precision_mean: DVector<f64>,
}

impl GaussianPrior {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: cov.nrows() });
        }
        let cov = symmetrize(cov);
        let factor = SpdFactor::new(&cov)?;
        if factor.jitter() > 0.0 {
            return Err(Error::NotPositiveDefinite { attempts: 1 });
        }
        let precision = factor.inverse();
        let precision_mean = &precision * &mean;
        Ok(Self { mean, cov, precision, precision_mean })
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        Self::isotropic(d, 1.0)
    }

    /// `N(0, s·I_d)`.
    pub fn isotropic(d: usize, s: f64) -> Self {
        Self {
            mean: DVector::zeros(d),
            cov: DMatrix::identity(d, d) * s,
            precision: DMatrix::identity(d, d) / s,
            precision_mean: DVector::zeros(d),
        }
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `S_0⁻¹ μ_0`.
    pub fn precision_mean(&self) -> &DVector<f64> {
        &self.precision_mean
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Prior for polynomial regression: `N(0, diag(1, 1/2, ..., 1/2^{d−1}))`.
pub fn polynomial_prior(d: usize) -> Result<GaussianPrior> {
    if d == 0 {
        return Err(Error::InvalidInput("polynomial degree needs d >= 1".into()));
    }
    let diag = DVector::from_iterator(d, (0..d).map(|k| 0.5f64.powi(k as i32)));
    GaussianPrior::new(DVector::zeros(d), DMatrix::from_diagonal(&diag))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianPosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sampler(&self) -> GaussianSampler {
        GaussianSampler { mean: self.mean.clone(), root: covariance_root(&self.cov) }
    }
}

/// Draws `μ + Lε` with `L Lᵀ = S`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: DVector<f64>,
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let eps = normal_vec(self.mean.len(), rng);
        &self.mean + &self.root * eps
    }
}

#[derive(Debug, Clone)]
pub struct KnownVarModel {
    pub sigma2: f64,
    pub prior: GaussianPrior,
}

/// Which data the bootstrap risk terms are evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiConvention {
    /// Posterior fit on the replicate, risk evaluated on the original data.
    #[default]
    EvalOnOriginal,
    /// Posterior fit and risk both on the replicate.
    EvalOnReplicate,
}

impl KnownVarModel {
    pub fn new(sigma2: f64, prior: GaussianPrior) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
        }
        Ok(Self { sigma2, prior })
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn check(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: d });
        }
        Ok(())
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        Ok(())
    }

    pub fn fit(&self, data: &Dataset, alpha: f64) -> Result<GaussianPosterior> {
        self.fit_stats(&data.stats(), alpha)
    }

    pub fn fit_stats(&self, s: &SufficientStats, alpha: f64) -> Result<GaussianPosterior> {
        self.check(s.d())?;
        Self::check_alpha(alpha)?;
        if alpha == 0.0 {
            return Ok(GaussianPosterior { mean: self.prior.mean.clone(), cov: self.prior.cov.clone() });
        }
        let c = alpha / (self.sigma2 * s.n as f64);
        let precision = &s.ztz * c + &self.prior.precision;
        let factor = SpdFactor::new(&precision)?;
        let rhs = &s.zty * c + &self.prior.precision_mean;
        Ok(GaussianPosterior { mean: factor.solve(&rhs), cov: factor.inverse() })
    }

    /// Closed-form `E_{θ∼π}[r_m(θ)]` for the eval statistics.
    pub fn gen_error_estimate(&self, post: &GaussianPosterior, eval: &Dataset) -> Result<f64> {
        self.gen_error_estimate_stats(post, &eval.stats())
    }

    pub fn gen_error_estimate_stats(&self, post: &GaussianPosterior, e: &SufficientStats) -> Result<f64> {
        self.check(e.d())?;
        self.check(post.dim())?;
        let mu = &post.mean;
        let b_mu = &e.ztz * mu;
        let tr = e.ztz.component_mul(&post.cov).sum();
        let val = e.yty - 2.0 * e.zty.dot(mu) + tr + mu.dot(&b_mu);
        Ok(val / (2.0 * self.sigma2 * e.n as f64))
    }

    /// Exact `∂/∂α` of [`Self::gen_error_estimate`] with the posterior fit on `fit`.
    pub fn gen_error_gradient(&self, fit: &Dataset, eval: &Dataset, alpha: f64) -> Result<f64> {
        self.gen_error_gradient_stats(&fit.stats(), &eval.stats(), alpha)
    }

    pub fn gen_error_gradient_stats(&self, f: &SufficientStats, e: &SufficientStats, alpha: f64) -> Result<f64> {
        self.check(e.d())?;
        let post = self.fit_stats(f, alpha)?;
        Ok(self.gradient_given_posterior(&post, f, e))
    }

    fn gradient_given_posterior(&self, post: &GaussianPosterior, f: &SufficientStats, e: &SufficientStats) -> f64 {
        let c = 1.0 / (self.sigma2 * f.n as f64);
        let s = &post.cov;
        let mu = &post.mean;
        // dS = −c S A S, dμ = c S (Zᵀy − A μ)
        let sa = s * &f.ztz;
        let ds = -(&sa * s) * c;
        let dmu = s * (&f.zty - &f.ztz * mu) * c;
        let b = &e.ztz;
        let val = -2.0 * e.zty.dot(&dmu) + b.component_mul(&ds).sum() + 2.0 * mu.dot(&(b * &dmu));
        val / (2.0 * self.sigma2 * e.n as f64)
    }

    /// Bootstrap average of the closed-form derivative with case resampling.
    pub fn bootstrap_gradient_psi<R: Rng + ?Sized>(
        &self,
        base: &Dataset,
        alpha: f64,
        boot: usize,
        convention: PsiConvention,
        rng: &mut R,
    ) -> Result<f64> {
        if boot < 1 {
            return Err(Error::InvalidInput("bootstrap needs boot >= 1".into()));
        }
        let n = base.n();
        let resamples: Vec<Vec<usize>> =
            (0..boot).map(|_| (0..n).map(|_| rng.random_range(0..n)).collect()).collect();
        self.bootstrap_gradient_psi_with(base, alpha, &resamples, convention)
    }

    /// As [`Self::bootstrap_gradient_psi`] with explicit resample indices.
    pub fn bootstrap_gradient_psi_with(
        &self,
        base: &Dataset,
        alpha: f64,
        resamples: &[Vec<usize>],
        convention: PsiConvention,
    ) -> Result<f64> {
        if resamples.is_empty() {
            return Err(Error::InvalidInput("bootstrap needs boot >= 1".into()));
        }
        let original = base.stats();
        let mut total = 0.0;
        for idx in resamples {
            let rep = base.select_rows(idx)?.stats();
            let post = self.fit_stats(&rep, alpha)?;
            let eval = match convention {
                PsiConvention::EvalOnOriginal => &original,
                PsiConvention::EvalOnReplicate => &rep,
            };
            total += self.gradient_given_posterior(&post, &rep, eval);
        }
        Ok(total / resamples.len() as f64)
    }

    /// Posterior-expected loss of each next point under prefix posteriors:
    /// `S(α) = Σ_{t=1}^{n−1} E_{π^(t)}[ℓ(θ, X_{t+1})]`, where `π^(t)` is fit on rows `0..t`.
    pub fn safebayes_peprl(&self, data: &Dataset, alpha: f64) -> Result<f64> {
        Ok(self.peprl_terms(data, alpha)?.iter().sum())
    }

    /// The individual `t = 1..n−1` terms of [`Self::safebayes_peprl`].
    pub fn peprl_terms(&self, data: &Dataset, alpha: f64) -> Result<Vec<f64>> {
        let n = data.n();
        if n < 2 {
            return Err(Error::InvalidInput("SafeBayes needs n >= 2".into()));
        }
        self.check(data.d())?;
        Self::check_alpha(alpha)?;
        let d = data.d();
        let mut ztz = DMatrix::zeros(d, d);
        let mut zty = DVector::zeros(d);
        let mut out = Vec::with_capacity(n - 1);
        for t in 1..n {
            let zi = data.row(t - 1);
            ztz.ger(1.0, &zi, &zi, 1.0);
            zty.axpy(data.y()[t - 1], &zi, 1.0);
            let c = alpha / (self.sigma2 * t as f64);
            let precision = &ztz * c + &self.prior.precision;
            let factor = SpdFactor::new(&precision)?;
            let mu = factor.solve(&(&zty * c + &self.prior.precision_mean));
            let z_next = data.row(t);
            let resid = data.y()[t] - z_next.dot(&mu);
            let var = factor.inv_quad(&z_next);
            out.push((resid * resid + var) / (2.0 * self.sigma2));
        }
        Ok(out)
    }

    /// Predictive mean and variance at `z_new`.
    pub fn posterior_predictive(&self, post: &GaussianPosterior, z_new: &DVector<f64>) -> Result<(f64, f64)> {
        if z_new.len() != post.dim() {
            return Err(Error::DimensionMismatch { expected: post.dim(), got: z_new.len() });
        }
        let mean = z_new.dot(&post.mean);
        let var = self.sigma2 + z_new.dot(&(&post.cov * z_new)).max(0.0);
        Ok((mean, var))
    }
}

/// Encodes 1-d observations as a regression on an all-ones design.
pub fn gaussian_mean_specialize(x: &DVector<f64>) -> Result<Dataset> {
    Dataset::regression(DMatrix::from_element(x.len(), 1, 1.0), x.clone())
}

/// Rows `(1, ζ_i, ζ_i², ..., ζ_i^{d−1})`.
pub fn vandermonde_expand(zeta: &DVector<f64>, d: usize) -> Result<DMatrix<f64>> {
    if d < 1 {
        return Err(Error::InvalidInput("vandermonde expansion needs d >= 1".into()));
    }
    Ok(DMatrix::from_fn(zeta.len(), d, |i, j| zeta[i].powi(j as i32)))
}
