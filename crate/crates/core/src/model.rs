//! Uniform interface over the four tempered-posterior constructions.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataKind, Dataset, SufficientStats};
use crate::error::{Error, Result};
use crate::linreg_known::{GaussianPosterior, GaussianPrior, GaussianSampler, KnownVarModel};
use crate::linreg_unknown::{
    fit_nig_stats, gen_error_estimate_nig_stats, nig_risk_stats, peprl_terms_nig, NigDraw, NigPosterior,
    NigPrior, NigRiskMode, NigSampler, PeprlForm,
};
use crate::logistic::{bbb_fit, jaakkola_fit, logistic_risk, BbbConfig, JaakkolaInit};
use crate::risk::{neg_covariance, McEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinregKnown,
    LinregUnknown,
    LogisticJaakkola,
    LogisticBbb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::LinregKnown, ModelKind::LinregUnknown, ModelKind::LogisticJaakkola, ModelKind::LogisticBbb];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LinregKnown => "linreg_known",
            ModelKind::LinregUnknown => "linreg_unknown",
            ModelKind::LogisticJaakkola => "logistic_jaakkola",
            ModelKind::LogisticBbb => "logistic_bbb",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown model `{s}`")))
    }

    pub fn data_kind(&self) -> DataKind {
        match self {
            ModelKind::LinregKnown | ModelKind::LinregUnknown => DataKind::Regression,
            _ => DataKind::Binary,
        }
    }

    /// True when the expected empirical risk has a closed form.
    pub fn has_exact_risk(&self) -> bool {
        matches!(self, ModelKind::LinregKnown | ModelKind::LinregUnknown)
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    LinregKnown(KnownVarModel),
    LinregUnknown(NigPrior),
    LogisticJaakkola { prior: GaussianPrior, em_iters: usize },
    LogisticBbb(BbbConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Gaussian(GaussianPosterior),
    Nig(NigPosterior),
}

impl Posterior {
    pub fn mean(&self) -> &DVector<f64> {
        match self {
            Posterior::Gaussian(p) => &p.mean,
            Posterior::Nig(p) => &p.mean,
        }
    }

    pub fn sampler(&self) -> Result<Sampler> {
        Ok(match self {
            Posterior::Gaussian(p) => Sampler::Gaussian(p.sampler()),
            Posterior::Nig(p) => Sampler::Nig(NigSampler::new(p)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Sampler {
    Gaussian(GaussianSampler),
    Nig(NigSampler),
}

impl Sampler {
    /// A draw; `sigma2` is 1 for posteriors over θ alone.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NigDraw {
        match self {
            Sampler::Gaussian(s) => NigDraw { theta: s.sample(rng), sigma2: 1.0 },
            Sampler::Nig(s) => s.sample(rng),
        }
    }
}

/// Empirical risk of posterior draws on a fixed dataset.
#[derive(Debug, Clone)]
pub enum RiskEvaluator {
    Known { stats: SufficientStats, sigma2: f64 },
    Unknown(SufficientStats),
    Logistic(Dataset),
}

impl RiskEvaluator {
    pub fn eval(&self, draw: &NigDraw) -> f64 {
        match self {
            RiskEvaluator::Known { stats, sigma2 } => stats.rss(&draw.theta) / (2.0 * sigma2 * stats.n as f64),
            RiskEvaluator::Unknown(stats) => nig_risk_stats(draw, stats),
            RiskEvaluator::Logistic(data) => logistic_risk(&draw.theta, data),
        }
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::LinregKnown(_) => ModelKind::LinregKnown,
            Model::LinregUnknown(_) => ModelKind::LinregUnknown,
            Model::LogisticJaakkola { .. } => ModelKind::LogisticJaakkola,
            Model::LogisticBbb(_) => ModelKind::LogisticBbb,
        }
    }

    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        let want = self.kind().data_kind();
        if data.kind() != want {
            return Err(Error::InvalidInput(format!(
                "model {} needs {:?} data, got {:?}",
                self.kind().name(),
                want,
                data.kind()
            )));
        }
        let d = match self {
            Model::LinregKnown(m) => m.dim(),
            Model::LinregUnknown(p) => p.dim(),
            Model::LogisticJaakkola { prior, .. } => prior.dim(),
            Model::LogisticBbb(_) => data.d(),
        };
        if d != data.d() {
            return Err(Error::DimensionMismatch { expected: d, got: data.d() });
        }
        Ok(())
    }

    /// The α-posterior of `data`. Only Bayes-by-Backprop consumes randomness.
    pub fn fit<R: Rng + ?Sized>(&self, data: &Dataset, alpha: f64, rng: &mut R) -> Result<Posterior> {
        Ok(match self {
            Model::LinregKnown(m) => Posterior::Gaussian(m.fit(data, alpha)?),
            Model::LinregUnknown(p) => Posterior::Nig(fit_nig_stats(p, &data.stats(), alpha)?),
            Model::LogisticJaakkola { prior, em_iters } => {
                Posterior::Gaussian(jaakkola_fit(prior, data, alpha, *em_iters, JaakkolaInit::Ones)?.posterior())
            }
            Model::LogisticBbb(cfg) => Posterior::Gaussian(bbb_fit(data, alpha, cfg, rng)?.posterior()),
        })
    }

    pub fn evaluator(&self, data: &Dataset) -> RiskEvaluator {
        match self {
            Model::LinregKnown(m) => RiskEvaluator::Known { stats: data.stats(), sigma2: m.sigma2 },
            Model::LinregUnknown(_) => RiskEvaluator::Unknown(data.stats()),
            _ => RiskEvaluator::Logistic(data.clone()),
        }
    }

    /// Closed-form `E_π[r(θ)]` on `eval`, when the model has one.
    pub fn exact_risk(&self, post: &Posterior, eval: &SufficientStats) -> Result<f64> {
        match (self, post) {
            (Model::LinregKnown(m), Posterior::Gaussian(p)) => m.gen_error_estimate_stats(p, eval),
            (Model::LinregUnknown(_), Posterior::Nig(p)) => {
                let mut unused = crate::random::rng_from_seed(0);
                gen_error_estimate_nig_stats(p, eval, NigRiskMode::Moment, 0, &mut unused)
            }
            _ => Err(Error::Unsupported(format!("{} has no closed-form risk", self.kind().name()))),
        }
    }

    /// Closed-form prefix-posterior loss sum, when the model has one.
    pub fn exact_peprl(&self, data: &Dataset, alpha: f64) -> Result<f64> {
        match self {
            Model::LinregKnown(m) => m.safebayes_peprl(data, alpha),
            Model::LinregUnknown(p) => Ok(peprl_terms_nig(p, data, alpha, PeprlForm::Moment)?.iter().sum()),
            _ => Err(Error::Unsupported(format!("{} has no closed-form SafeBayes term", self.kind().name()))),
        }
    }

    /// `−Cov_π[r_test, r_train]` from `mc` posterior draws.
    pub fn covariance_gradient<R: Rng + ?Sized>(
        &self,
        post: &Posterior,
        train: &RiskEvaluator,
        test: &RiskEvaluator,
        mc: usize,
        rng: &mut R,
    ) -> Result<McEstimate> {
        if mc < 2 {
            return Err(Error::InvalidInput(format!("covariance gradient needs mc >= 2, got {mc}")));
        }
        let sampler = post.sampler()?;
        let mut a = Vec::with_capacity(mc);
        let mut b = Vec::with_capacity(mc);
        for i in 0..mc {
            let draw = sampler.sample(rng);
            let (ra, rb) = (train.eval(&draw), test.eval(&draw));
            if !(ra.is_finite() && rb.is_finite()) {
                return Err(Error::NonFinite { index: i, value: if ra.is_finite() { rb } else { ra } });
            }
            a.push(ra);
            b.push(rb);
        }
        Ok(neg_covariance(&a, &b))
    }

    /// Monte-Carlo `E_π[r(θ)]`.
    pub fn mc_risk<R: Rng + ?Sized>(
        &self,
        post: &Posterior,
        eval: &RiskEvaluator,
        mc: usize,
        rng: &mut R,
    ) -> Result<McEstimate> {
        let sampler = post.sampler()?;
        crate::risk::mc_risk(|r: &mut R| sampler.sample(r), |d| eval.eval(d), mc, rng)
    }
}
