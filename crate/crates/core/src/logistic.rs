//! Variational α-posteriors for logistic regression.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataKind, Dataset};
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::linreg_known::{GaussianPosterior, GaussianPrior};
use crate::random::{normal_vec, rng_from_seed};
use crate::special::{sigmoid, softplus, inverse_softplus};

/// `−yθᵀz − log σ(−θᵀz)`, i.e. `softplus(θᵀz) − y·θᵀz`.
pub fn logistic_loss(theta: &DVector<f64>, z: &DVector<f64>, y: f64) -> f64 {
    let u = theta.dot(z);
    softplus(u) - y * u
}

/// Mean logistic loss over the dataset.
pub fn logistic_risk(theta: &DVector<f64>, data: &Dataset) -> f64 {
    let u = data.z() * theta;
    let total: f64 = u.iter().zip(data.y().iter()).map(|(&u, &y)| softplus(u) - y * u).sum();
    total / data.n() as f64
}

/// `∇_θ` of [`logistic_risk`]: `(1/n) Zᵀ(σ(Zθ) − y)`.
pub fn logistic_risk_grad(theta: &DVector<f64>, data: &Dataset) -> DVector<f64> {
    let u = data.z() * theta;
    let r = DVector::from_iterator(u.len(), u.iter().zip(data.y().iter()).map(|(&u, &y)| sigmoid(u) - y));
    data.z().tr_mul(&r) / data.n() as f64
}

/// `λ(v) = (σ(v) − ½)/(2v) = tanh(v/2)/(4v)`, with `λ(0) = 1/8`.
pub fn lambda_of_v(v: f64) -> f64 {
    let v = v.abs();
    if v < 1e-4 {
        1.0 / 8.0 - v * v / 96.0
    } else {
        (0.5 * v).tanh() / (4.0 * v)
    }
}

fn require_binary(data: &Dataset) -> Result<()> {
    if data.kind() != DataKind::Binary {
        return Err(Error::InvalidInput("logistic models need a binary dataset".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JaakkolaState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Variational points that produced `mean` and `cov`.
    pub v: DVector<f64>,
}

impl JaakkolaState {
    pub fn posterior(&self) -> GaussianPosterior {
        GaussianPosterior { mean: self.mean.clone(), cov: self.cov.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JaakkolaInit {
    #[default]
    Ones,
    /// Uniform on (0, 2) from the given seed.
    Random(u64),
}

/// `v_i = sqrt(z_iᵀ(S + μμᵀ)z_i)`.
pub fn jaakkola_v(mean: &DVector<f64>, cov: &DMatrix<f64>, data: &Dataset) -> DVector<f64> {
    let zs = data.z() * cov;
    let zm = data.z() * mean;
    DVector::from_iterator(
        data.n(),
        (0..data.n()).map(|i| {
            let q = zs.row(i).dot(&data.z().row(i)) + zm[i] * zm[i];
            q.max(0.0).sqrt()
        }),
    )
}

fn jaakkola_update(
    prior: &GaussianPrior,
    data: &Dataset,
    alpha: f64,
    v: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let a = alpha / data.n() as f64;
    let mut precision = prior.precision().clone();
    let mut rhs = prior.precision_mean().clone();
    for i in 0..data.n() {
        let z = data.row(i);
        precision.ger(2.0 * a * lambda_of_v(v[i]), &z, &z, 1.0);
        rhs.axpy(a * (data.y()[i] - 0.5), &z, 1.0);
    }
    let factor = SpdFactor::new(&precision)?;
    Ok((factor.solve(&rhs), factor.inverse()))
}

/// Alternates the `(μ_P, S_P)` update and the `v` update `em_iters` times.
pub fn jaakkola_fit(
    prior: &GaussianPrior,
    data: &Dataset,
    alpha: f64,
    em_iters: usize,
    init: JaakkolaInit,
) -> Result<JaakkolaState> {
    require_binary(data)?;
    if data.d() != prior.dim() {
        return Err(Error::DimensionMismatch { expected: prior.dim(), got: data.d() });
    }
    if em_iters < 1 {
        return Err(Error::InvalidInput("jaakkola_fit needs em_iters >= 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        let (mean, cov) = (prior.mean().clone(), prior.cov().clone());
        let v = jaakkola_v(&mean, &cov, data);
        return Ok(JaakkolaState { mean, cov, v });
    }
    let mut v = match init {
        JaakkolaInit::Ones => DVector::from_element(data.n(), 1.0),
        JaakkolaInit::Random(seed) => {
            let mut rng = rng_from_seed(seed);
            DVector::from_iterator(data.n(), (0..data.n()).map(|_| rng.random_range(0.0..2.0)))
        }
    };
    let mut state = None;
    for it in 0..em_iters {
        let (mean, cov) = jaakkola_update(prior, data, alpha, &v)?;
        if it + 1 < em_iters {
            v = jaakkola_v(&mean, &cov, data);
        }
        state = Some((mean, cov));
    }
    let (mean, cov) = state.expect("em_iters >= 1");
    Ok(JaakkolaState { mean, cov, v })
}

/// Largest change of a variational point when recomputed from the state.
pub fn fixed_point_residual(state: &JaakkolaState, data: &Dataset) -> f64 {
    let fresh = jaakkola_v(&state.mean, &state.cov, data);
    (fresh - &state.v).amax()
}

/// Mean-field Gaussian `N(μ, diag(softplus(ρ)²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbbState {
    pub mean: DVector<f64>,
    pub rho: DVector<f64>,
}

impl BbbState {
    /// `μ = 0`, `σ = 1`: the standard normal prior.
    pub fn prior(d: usize) -> Self {
        Self { mean: DVector::zeros(d), rho: DVector::from_element(d, inverse_softplus(1.0)) }
    }

    pub fn sigma(&self) -> DVector<f64> {
        self.rho.map(softplus)
    }

    pub fn posterior(&self) -> GaussianPosterior {
        let s = self.sigma();
        GaussianPosterior { mean: self.mean.clone(), cov: DMatrix::from_diagonal(&s.component_mul(&s)) }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let eps = normal_vec(self.mean.len(), rng);
        &self.mean + self.sigma().component_mul(&eps)
    }
}

/// `log q(θ) − log π_0(θ) + α·r_n(θ)` with the `2π` constants dropped:
/// `−Σ log σ_j − ½Σ((θ_j − μ_j)/σ_j)² + ½θᵀθ + α·r_n(θ)`.
pub fn bbb_negative_elbo(theta: &DVector<f64>, state: &BbbState, data: &Dataset, alpha: f64) -> f64 {
    let sigma = state.sigma();
    let mut log_q = 0.0;
    for j in 0..theta.len() {
        let w = (theta[j] - state.mean[j]) / sigma[j];
        log_q -= sigma[j].ln() + 0.5 * w * w;
    }
    log_q + 0.5 * theta.norm_squared() + alpha * logistic_risk(theta, data)
}

/// Partial derivatives of [`bbb_negative_elbo`], each holding the other blocks fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct BbbPartials {
    pub theta: DVector<f64>,
    pub mean: DVector<f64>,
    pub rho: DVector<f64>,
}

pub fn bbb_partials(theta: &DVector<f64>, state: &BbbState, data: &Dataset, alpha: f64) -> BbbPartials {
    let sigma = state.sigma();
    let d = theta.len();
    let diff = theta - &state.mean;
    let grad_r = logistic_risk_grad(theta, data);
    let mut g_theta = DVector::zeros(d);
    let mut g_mean = DVector::zeros(d);
    let mut g_rho = DVector::zeros(d);
    for j in 0..d {
        let s2 = sigma[j] * sigma[j];
        g_theta[j] = -diff[j] / s2 + theta[j] + alpha * grad_r[j];
        g_mean[j] = diff[j] / s2;
        g_rho[j] = (-1.0 / sigma[j] + diff[j] * diff[j] / (s2 * sigma[j])) * sigmoid(state.rho[j]);
    }
    BbbPartials { theta: g_theta, mean: g_mean, rho: g_rho }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BbbConfig {
    pub iters: usize,
    pub eta0: f64,
}

impl Default for BbbConfig {
    fn default() -> Self {
        Self { iters: 200, eta0: 0.1 }
    }
}

/// Reparametrized SGD on the negative ELBO with one draw per step and
/// step size `η_0/√t`, starting from the prior.
pub fn bbb_fit<R: Rng + ?Sized>(data: &Dataset, alpha: f64, cfg: &BbbConfig, rng: &mut R) -> Result<BbbState> {
    require_binary(data)?;
    if cfg.iters < 1 {
        return Err(Error::InvalidInput("bbb_fit needs iters >= 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let d = data.d();
    let mut state = BbbState::prior(d);
    for t in 1..=cfg.iters {
        let eps = normal_vec(d, rng);
        let sigma = state.sigma();
        let theta = &state.mean + sigma.component_mul(&eps);
        let p = bbb_partials(&theta, &state, data, alpha);
        let eta = cfg.eta0 / (t as f64).sqrt();
        for j in 0..d {
            let g_mean = p.theta[j] + p.mean[j];
            let g_rho = p.theta[j] * eps[j] * sigmoid(state.rho[j]) + p.rho[j];
            state.mean[j] -= eta * g_mean;
            state.rho[j] -= eta * g_rho;
        }
        if state.mean.iter().chain(state.rho.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: t });
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_at_zero_margin_is_ln2() {
        let z = DVector::from_vec(vec![1.0, -2.0]);
        let theta = DVector::zeros(2);
        for y in [0.0, 1.0] {
            assert!((logistic_loss(&theta, &z, y) - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_is_stable_for_large_margins() {
        let z = DVector::from_element(1, 1.0);
        let l = logistic_loss(&DVector::from_element(1, -100.0), &z, 1.0);
        assert!((l - 100.0).abs() < 1e-12);
        let l = logistic_loss(&DVector::from_element(1, 700.0), &z, 1.0);
        assert!((0.0..1e-300).contains(&l));
        let l = logistic_loss(&DVector::from_element(1, 700.0), &z, 0.0);
        assert_eq!(l, 700.0);
    }

    #[test]
    fn loss_matches_naive_formula_for_moderate_margins() {
        for &u in &[-20.0f64, -3.0, -0.1, 0.4, 5.0, 20.0] {
            for y in [0.0, 1.0] {
                let naive = -u * y - (1.0 / (1.0 + u.exp())).ln();
                let stable = logistic_loss(&DVector::from_element(1, u), &DVector::from_element(1, 1.0), y);
                assert!((naive - stable).abs() < 1e-12, "u = {u}, y = {y}");
            }
        }
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_of_v(0.0), 0.125);
        let direct = (sigmoid(1.0) - 0.5) / 2.0;
        assert!((lambda_of_v(1.0) - direct).abs() < 1e-15);
        assert!((lambda_of_v(1.0) - 0.115_529_289_3).abs() < 1e-10);
        let tiny = 1e-5;
        assert!((lambda_of_v(tiny) - (sigmoid(tiny) - 0.5) / (2.0 * tiny)).abs() < 1e-10);
        let mut prev = lambda_of_v(0.0);
        for k in 1..=2000 {
            let cur = lambda_of_v(k as f64 * 0.01);
            assert!(cur < prev);
            prev = cur;
        }
    }

    #[test]
    fn elbo_is_zero_at_prior_self_match() {
        let data = Dataset::binary(DMatrix::from_element(2, 2, 1.0), DVector::from_vec(vec![0.0, 1.0])).unwrap();
        let v = bbb_negative_elbo(&DVector::zeros(2), &BbbState::prior(2), &data, 0.0);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn regression_data_rejected() {
        let data = Dataset::regression(DMatrix::from_element(2, 1, 1.0), DVector::from_vec(vec![0.0, 1.0])).unwrap();
        let prior = GaussianPrior::standard(1);
        assert!(jaakkola_fit(&prior, &data, 1.0, 5, JaakkolaInit::Ones).is_err());
        assert!(bbb_fit(&data, 1.0, &BbbConfig::default(), &mut rng_from_seed(0)).is_err());
    }
}
