//! Linear regression with unknown noise variance under a Normal-Inverse-Gamma prior.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{Dataset, SufficientStats};
use crate::error::{Error, Result};
use crate::linalg::{covariance_root, SpdFactor};
use crate::linreg_known::GaussianPrior;
use crate::random::normal_vec;
use crate::special::digamma;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `NIG(μ_0, S_0, a_0, b_0)`: `θ | σ² ~ N(μ_0, σ²S_0)`, `σ² ~ InvGamma(a_0, b_0)`.
#[derive(Debug, Clone)]
pub struct NigPrior {
    pub gaussian: GaussianPrior,
    pub a0: f64,
    pub b0: f64,
}

impl NigPrior {
    pub fn new(gaussian: GaussianPrior, a0: f64, b0: f64) -> Result<Self> {
        if !(a0 > 0.0 && b0 > 0.0 && a0.is_finite() && b0.is_finite()) {
            return Err(Error::InvalidInput(format!("NIG prior needs a0, b0 > 0, got ({a0}, {b0})")));
        }
        Ok(Self { gaussian, a0, b0 })
    }

    /// `(0, I_d, 2, 2)`.
    pub fn default_for(d: usize) -> Self {
        Self { gaussian: GaussianPrior::standard(d), a0: 2.0, b0: 2.0 }
    }

    pub fn dim(&self) -> usize {
        self.gaussian.dim()
    }

    pub fn as_posterior(&self) -> NigPosterior {
        NigPosterior {
            mean: self.gaussian.mean().clone(),
            cov: self.gaussian.cov().clone(),
            a: self.a0,
            b: self.b0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NigPosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigMoments {
    pub e_inv_sigma2: f64,
    pub e_log_sigma2: f64,
}

/// One joint draw `(θ, σ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NigDraw {
    pub theta: DVector<f64>,
    pub sigma2: f64,
}

pub fn fit_nig(prior: &NigPrior, data: &Dataset, alpha: f64) -> Result<NigPosterior> {
    fit_nig_stats(prior, &data.stats(), alpha)
}

pub fn fit_nig_stats(prior: &NigPrior, s: &SufficientStats, alpha: f64) -> Result<NigPosterior> {
    if s.d() != prior.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: s.d() });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(prior.as_posterior());
    }
    let g = &prior.gaussian;
    let c = alpha / s.n as f64;
    let precision = &s.ztz * c + g.precision();
    let factor = SpdFactor::new(&precision)?;
    let mean = factor.solve(&(&s.zty * c + g.precision_mean()));
    let dm = &mean - g.mean();
    // Equal to b_0 + ½(μ_0ᵀS_0⁻¹μ_0 − μ_PᵀS_P⁻¹μ_P + c·YᵀY) but free of cancellation.
    let b = prior.b0 + 0.5 * (c * s.rss(&mean) + dm.dot(&(g.precision() * &dm)));
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::IllPosed(b));
    }
    Ok(NigPosterior { mean, cov: factor.inverse(), a: prior.a0 + alpha / 2.0, b })
}

/// `b_P` exactly as `b_0 + ½(μ_0ᵀS_0⁻¹μ_0 − μ_PᵀS_P⁻¹μ_P + (α/m)·YᵀY)`.
pub fn b_posterior_direct(prior: &NigPrior, s: &SufficientStats, alpha: f64) -> Result<f64> {
    let g = &prior.gaussian;
    let c = alpha / s.n as f64;
    let precision = &s.ztz * c + g.precision();
    let factor = SpdFactor::new(&precision)?;
    let mean = factor.solve(&(&s.zty * c + g.precision_mean()));
    let quad_prior = g.mean().dot(g.precision_mean());
    let quad_post = mean.dot(&(&precision * &mean));
    Ok(prior.b0 + 0.5 * (quad_prior - quad_post + c * s.yty))
}

pub fn nig_moments(post: &NigPosterior) -> Result<NigMoments> {
    if post.a.is_nan() || post.a <= 0.0 {
        return Err(Error::InvalidInput(format!("a_P must be positive, got {}", post.a)));
    }
    if post.b.is_nan() || post.b <= 0.0 {
        return Err(Error::IllPosed(post.b));
    }
    Ok(NigMoments { e_inv_sigma2: post.a / post.b, e_log_sigma2: post.b.ln() - digamma(post.a) })
}

/// Draws `σ² ~ InvGamma(a_P, b_P)` then `θ | σ² ~ N(μ_P, σ²S_P)`.
#[derive(Debug, Clone)]
pub struct NigSampler {
    mean: DVector<f64>,
    root: DMatrix<f64>,
    gamma: Gamma<f64>,
}

impl NigSampler {
    pub fn new(post: &NigPosterior) -> Result<Self> {
        nig_moments(post)?;
        let gamma = Gamma::new(post.a, 1.0 / post.b)
            .map_err(|e| Error::InvalidInput(format!("invalid gamma parameters: {e}")))?;
        Ok(Self { mean: post.mean.clone(), root: covariance_root(&post.cov), gamma })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NigDraw {
        let precision = self.gamma.sample(rng);
        let sigma2 = 1.0 / precision;
        let eps = normal_vec(self.mean.len(), rng);
        let theta = &self.mean + (&self.root * eps) * sigma2.sqrt();
        NigDraw { theta, sigma2 }
    }
}

pub fn sample_nig<R: Rng + ?Sized>(post: &NigPosterior, rng: &mut R) -> Result<NigDraw> {
    Ok(NigSampler::new(post)?.sample(rng))
}

/// Per-point loss `(y − zᵀθ)²/(2σ²) + ½log 2πσ²`.
pub fn nig_loss(draw: &NigDraw, z: &DVector<f64>, y: f64) -> f64 {
    let r = y - z.dot(&draw.theta);
    r * r / (2.0 * draw.sigma2) + 0.5 * draw.sigma2.ln() + HALF_LN_2PI
}

/// Empirical risk of a draw from the statistics of the evaluation data.
pub fn nig_risk_stats(draw: &NigDraw, s: &SufficientStats) -> f64 {
    s.rss(&draw.theta) / (2.0 * draw.sigma2 * s.n as f64) + 0.5 * draw.sigma2.ln() + HALF_LN_2PI
}

/// How the expected empirical risk under a NIG posterior is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NigRiskMode {
    /// Gamma-ratio expectations of `θ/σ²` and `θᵀBθ/σ²` as they are printed in the
    /// original derivation. Kept for comparison; they disagree with sampling.
    GammaRatio,
    /// Exact conditional-moment form:
    /// `(1/2m){(a/b)‖Y − Zμ‖² + Tr(ZᵀZ S)} + ½(log b − ψ(a)) + ½log 2π`.
    Moment,
    /// Average over posterior draws.
    #[default]
    MonteCarlo,
}

pub fn gen_error_estimate_nig<R: Rng + ?Sized>(
    post: &NigPosterior,
    eval: &Dataset,
    mode: NigRiskMode,
    mc: usize,
    rng: &mut R,
) -> Result<f64> {
    gen_error_estimate_nig_stats(post, &eval.stats(), mode, mc, rng)
}

pub fn gen_error_estimate_nig_stats<R: Rng + ?Sized>(
    post: &NigPosterior,
    e: &SufficientStats,
    mode: NigRiskMode,
    mc: usize,
    rng: &mut R,
) -> Result<f64> {
    if e.d() != post.mean.len() {
        return Err(Error::DimensionMismatch { expected: post.mean.len(), got: e.d() });
    }
    let mom = nig_moments(post)?;
    let m = e.n as f64;
    let mu = &post.mean;
    let tr = e.ztz.component_mul(&post.cov).sum();
    let quad_mu = mu.dot(&(&e.ztz * mu));
    match mode {
        NigRiskMode::Moment => Ok((mom.e_inv_sigma2 * e.rss(mu) + tr) / (2.0 * m)
            + 0.5 * mom.e_log_sigma2
            + HALF_LN_2PI),
        NigRiskMode::GammaRatio => {
            let d = mu.len() as f64;
            let (a, b) = (post.a, post.b);
            let guard = a + (d - 3.0) / 2.0;
            if guard <= 0.0 {
                return Err(Error::GammaRatioUndefined(guard));
            }
            let ratio = |shift: f64| (ln_gamma(a + shift) - ln_gamma(a) - shift * b.ln()).exp();
            let e_theta = mu * ratio((d - 1.0) / 2.0);
            let e_quad = ratio((d - 1.0) / 2.0) * tr + ratio((d - 3.0) / 2.0) * quad_mu;
            Ok((mom.e_inv_sigma2 * e.yty - 2.0 * e.zty.dot(&e_theta) + e_quad) / (2.0 * m)
                + 0.5 * mom.e_log_sigma2
                + HALF_LN_2PI)
        }
        NigRiskMode::MonteCarlo => {
            if mc < 1 {
                return Err(Error::InvalidInput("Monte-Carlo mode needs mc >= 1".into()));
            }
            let sampler = NigSampler::new(post)?;
            let mut sum = 0.0;
            for _ in 0..mc {
                sum += nig_risk_stats(&sampler.sample(rng), e);
            }
            Ok(sum / mc as f64)
        }
    }
}

/// Form of the per-prefix SafeBayes term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeprlForm {
    /// `½[(a/b)(y − zᵀμ)² + zᵀSz] + ½(log b − ψ(a)) + ½log 2π`.
    #[default]
    Moment,
    /// `(a/2b)[(y − zᵀμ)² + zᵀSz] + ½(log b − ψ(a)) + ½log 2π`, i.e. with the
    /// posterior trace also scaled by `a/b`.
    ScaledTrace,
}

pub fn safebayes_peprl_nig(prior: &NigPrior, data: &Dataset, alpha: f64) -> Result<f64> {
    Ok(peprl_terms_nig(prior, data, alpha, PeprlForm::Moment)?.iter().sum())
}

pub fn safebayes_peprl_nig_with(prior: &NigPrior, data: &Dataset, alpha: f64, form: PeprlForm) -> Result<f64> {
    Ok(peprl_terms_nig(prior, data, alpha, form)?.iter().sum())
}

/// Terms `t = 1..n−1`, each using the posterior fit on the first `t` rows.
pub fn peprl_terms_nig(prior: &NigPrior, data: &Dataset, alpha: f64, form: PeprlForm) -> Result<Vec<f64>> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidInput("SafeBayes needs n >= 2".into()));
    }
    if data.d() != prior.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: data.d() });
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let g = &prior.gaussian;
    let d = data.d();
    let mut stats =
        SufficientStats { ztz: DMatrix::zeros(d, d), zty: DVector::zeros(d), yty: 0.0, n: 0 };
    let a = prior.a0 + alpha / 2.0;
    let mut out = Vec::with_capacity(n - 1);
    for t in 1..n {
        let zi = data.row(t - 1);
        let yi = data.y()[t - 1];
        stats.ztz.ger(1.0, &zi, &zi, 1.0);
        stats.zty.axpy(yi, &zi, 1.0);
        stats.yty += yi * yi;
        stats.n = t;
        let c = alpha / t as f64;
        let precision = &stats.ztz * c + g.precision();
        let factor = SpdFactor::new(&precision)?;
        let mu = factor.solve(&(&stats.zty * c + g.precision_mean()));
        let dm = &mu - g.mean();
        let b = prior.b0 + 0.5 * (c * stats.rss(&mu) + dm.dot(&(g.precision() * &dm)));
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::IllPosed(b));
        }
        let z_next = data.row(t);
        let resid = data.y()[t] - z_next.dot(&mu);
        let var = factor.inv_quad(&z_next);
        let e_inv = a / b;
        let quad = match form {
            PeprlForm::Moment => e_inv * resid * resid + var,
            PeprlForm::ScaledTrace => e_inv * (resid * resid + var),
        };
        out.push(0.5 * quad + 0.5 * (b.ln() - digamma(a)) + HALF_LN_2PI);
    }
    Ok(out)
}

/// `½log 2π`, the constant part of the Gaussian negative log-likelihood.
pub fn half_ln_2pi() -> f64 {
    0.5 * (2.0 * PI).ln()
}
