//! The five temperature-selection strategies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alpha::AlphaBounds;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linreg_known::PsiConvention;
use crate::minimize::minimize_alpha;
use crate::model::{Model, ModelKind};
use crate::sgd::{sgd_over_alpha, SgdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Bayes,
    Naive,
    SampleSplit,
    Bootstrap,
    #[serde(rename = "safebayes")]
    SafeBayes,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Bayes,
        StrategyKind::Naive,
        StrategyKind::SampleSplit,
        StrategyKind::Bootstrap,
        StrategyKind::SafeBayes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Bayes => "bayes",
            StrategyKind::Naive => "naive",
            StrategyKind::SampleSplit => "sample_split",
            StrategyKind::Bootstrap => "bootstrap",
            StrategyKind::SafeBayes => "safebayes",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown strategy `{s}`")))
    }
}

/// Whether a strategy minimizes an exact objective or runs SGD on Monte-Carlo gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    #[default]
    Auto,
    ClosedForm,
    McSgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    /// Set from the experiment-level bounds rather than this block.
    #[serde(skip)]
    pub bounds: AlphaBounds,
    pub mc: usize,
    pub boot: usize,
    pub sgd: SgdConfig,
    pub em_iters: usize,
    pub mode: Backbone,
    pub psi_convention: PsiConvention,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            bounds: AlphaBounds::default(),
            mc: 2000,
            boot: 1000,
            sgd: SgdConfig::default(),
            em_iters: 5,
            mode: Backbone::Auto,
            psi_convention: PsiConvention::EvalOnOriginal,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.sgd.validate()?;
        if self.mc < 2 {
            return Err(Error::InvalidInput("strategy mc must be >= 2".into()));
        }
        if self.boot < 1 {
            return Err(Error::InvalidInput("strategy boot must be >= 1".into()));
        }
        if self.em_iters < 1 {
            return Err(Error::InvalidInput("strategy em_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolved backbone for a strategy on a model.
    pub fn backbone(&self, strategy: StrategyKind, model: ModelKind) -> Backbone {
        match self.mode {
            Backbone::Auto => {
                if model.has_exact_risk() && strategy != StrategyKind::Bootstrap {
                    Backbone::ClosedForm
                } else if strategy == StrategyKind::Bootstrap && model == ModelKind::LinregKnown {
                    // SGD on the exact per-replicate derivative
                    Backbone::ClosedForm
                } else {
                    Backbone::McSgd
                }
            }
            m => m,
        }
    }
}

fn closed_form_unsupported(strategy: StrategyKind, model: ModelKind) -> Error {
    Error::Unsupported(format!(
        "strategy {} has no closed-form backbone on {}",
        strategy.name(),
        model.name()
    ))
}

/// Runs `strategy` and returns the chosen (unnormalized) α.
pub fn run_strategy<R: Rng + ?Sized>(
    strategy: StrategyKind,
    data: &Dataset,
    model: &Model,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    model.check_data(data)?;
    match strategy {
        StrategyKind::Bayes => Ok(bayes_strategy(data, &cfg.bounds)),
        StrategyKind::Naive => naive_strategy(data, model, cfg, rng),
        StrategyKind::SampleSplit => sample_split_strategy(data, model, cfg, rng),
        StrategyKind::Bootstrap => bootstrap_strategy(data, model, cfg, rng),
        StrategyKind::SafeBayes => safebayes_strategy(data, model, cfg, rng),
    }
}

/// `α = n`, clipped to the bounds.
pub fn bayes_strategy(data: &Dataset, bounds: &AlphaBounds) -> f64 {
    bounds.clip(data.n() as f64, data.n())
}

fn sgd_from_bayes<G>(data: &Dataset, cfg: &StrategyConfig, grad: G) -> Result<f64>
where
    G: FnMut(f64, usize) -> Result<f64>,
{
    let n = data.n();
    sgd_over_alpha(grad, n as f64, &cfg.bounds, n, &cfg.sgd)
}

fn minimize_on_bounds<F>(data: &Dataset, cfg: &StrategyConfig, f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (lo, hi) = cfg.bounds.scaled(data.n());
    Ok(minimize_alpha(f, lo, hi, data.n())?.x)
}

/// Minimizes the empirical risk expected under the posterior of the same data.
pub fn naive_strategy<R: Rng + ?Sized>(
    data: &Dataset,
    model: &Model,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<f64> {
    match cfg.backbone(StrategyKind::Naive, model.kind()) {
        Backbone::ClosedForm => {
            let stats = data.stats();
            let mut unused = crate::random::rng_from_seed(0);
            minimize_on_bounds(data, cfg, |a| model.exact_risk(&model.fit(data, a, &mut unused)?, &stats))
        }
        _ => {
            let ev = model.evaluator(data);
            sgd_from_bayes(data, cfg, |a, _| {
                let post = model.fit(data, a, rng)?;
                Ok(model.covariance_gradient(&post, &ev, &ev, cfg.mc, rng)?.value)
            })
        }
    }
}

/// Fits on the first ⌈n/2⌉ rows and minimizes the expected risk on the rest.
pub fn sample_split_strategy<R: Rng + ?Sized>(
    data: &Dataset,
    model: &Model,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<f64> {
    let (first, second) = data.split_halves()?;
    match cfg.backbone(StrategyKind::SampleSplit, model.kind()) {
        Backbone::ClosedForm => {
            let stats = second.stats();
            let mut unused = crate::random::rng_from_seed(0);
            minimize_on_bounds(data, cfg, |a| model.exact_risk(&model.fit(&first, a, &mut unused)?, &stats))
        }
        _ => {
            let train = model.evaluator(&first);
            let test = model.evaluator(&second);
            sgd_from_bayes(data, cfg, |a, _| {
                let post = model.fit(&first, a, rng)?;
                Ok(model.covariance_gradient(&post, &train, &test, cfg.mc, rng)?.value)
            })
        }
    }
}

/// SGD on the bootstrap-averaged derivative of the expected risk.
pub fn bootstrap_strategy<R: Rng + ?Sized>(
    data: &Dataset,
    model: &Model,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<f64> {
    let n = data.n();
    match (cfg.backbone(StrategyKind::Bootstrap, model.kind()), model) {
        (Backbone::ClosedForm, Model::LinregKnown(m)) => sgd_from_bayes(data, cfg, |a, _| {
            m.bootstrap_gradient_psi(data, a, cfg.boot, cfg.psi_convention, rng)
        }),
        (Backbone::ClosedForm, _) => Err(closed_form_unsupported(StrategyKind::Bootstrap, model.kind())),
        _ => {
            let original = model.evaluator(data);
            sgd_from_bayes(data, cfg, |a, _| {
                let mut total = 0.0;
                for _ in 0..cfg.boot {
                    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    let rep = data.select_rows(&idx)?;
                    let post = model.fit(&rep, a, rng)?;
                    let train = model.evaluator(&rep);
                    let test = match cfg.psi_convention {
                        PsiConvention::EvalOnOriginal => &original,
                        PsiConvention::EvalOnReplicate => &train,
                    };
                    total += model.covariance_gradient(&post, &train, test, cfg.mc, rng)?.value;
                }
                Ok(total / cfg.boot as f64)
            })
        }
    }
}

/// Minimizes the summed posterior-expected loss of each next observation.
pub fn safebayes_strategy<R: Rng + ?Sized>(
    data: &Dataset,
    model: &Model,
    cfg: &StrategyConfig,
    rng: &mut R,
) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::InvalidInput("SafeBayes needs n >= 2".into()));
    }
    match cfg.backbone(StrategyKind::SafeBayes, model.kind()) {
        Backbone::ClosedForm => minimize_on_bounds(data, cfg, |a| model.exact_peprl(data, a)),
        _ => sgd_from_bayes(data, cfg, |a, _| safebayes_mc_gradient(data, model, a, cfg.mc, rng)),
    }
}

/// `Σ_t −Cov_{π^(t)}[ℓ(θ, X_{t+1}), r^(t)(θ)]` with the prefix posteriors `π^(t)`.
pub fn safebayes_mc_gradient<R: Rng + ?Sized>(
    data: &Dataset,
    model: &Model,
    alpha: f64,
    mc: usize,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 1..data.n() {
        let prefix = data.slice(0, t)?;
        let next = data.slice(t, t + 1)?;
        let post = model.fit(&prefix, alpha, rng)?;
        let train = model.evaluator(&prefix);
        let test = model.evaluator(&next);
        total += model.covariance_gradient(&post, &train, &test, mc, rng)?.value;
    }
    Ok(total)
}

/// The strategy's own estimate of the generalization error at α.
///
/// Closed form where available, Monte-Carlo otherwise. The SafeBayes value is
/// averaged over its `n − 1` terms so that it is on the scale of a per-point risk.
pub fn estimate_objective<R: Rng + ?Sized>(
    strategy: StrategyKind,
    data: &Dataset,
    model: &Model,
    cfg: &StrategyConfig,
    alpha: f64,
    rng: &mut R,
) -> Result<f64> {
    let exact = cfg.backbone(strategy, model.kind()) == Backbone::ClosedForm && model.kind().has_exact_risk();
    let expected = |fit: &Dataset, eval: &Dataset, rng: &mut R| -> Result<f64> {
        let post = model.fit(fit, alpha, rng)?;
        if exact {
            model.exact_risk(&post, &eval.stats())
        } else {
            Ok(model.mc_risk(&post, &model.evaluator(eval), cfg.mc, rng)?.value)
        }
    };
    match strategy {
        StrategyKind::Bayes | StrategyKind::Naive => expected(data, data, rng),
        StrategyKind::SampleSplit => {
            let (a, b) = data.split_halves()?;
            expected(&a, &b, rng)
        }
        StrategyKind::Bootstrap => {
            let n = data.n();
            let reps = cfg.boot.min(100);
            let mut total = 0.0;
            for _ in 0..reps {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                total += expected(&data.select_rows(&idx)?, data, rng)?;
            }
            Ok(total / reps as f64)
        }
        StrategyKind::SafeBayes => {
            let n = data.n();
            if n < 2 {
                return Err(Error::InvalidInput("SafeBayes needs n >= 2".into()));
            }
            if exact {
                return Ok(model.exact_peprl(data, alpha)? / (n - 1) as f64);
            }
            let mut total = 0.0;
            for t in 1..n {
                total += expected(&data.slice(0, t)?, &data.slice(t, t + 1)?, rng)?;
            }
            Ok(total / (n - 1) as f64)
        }
    }
}
