use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alpha::AlphaBounds;
use crate::datasets::{DatasetSpec, Setting};
use crate::error::{Error, Result};
use crate::linreg_known::{polynomial_prior, GaussianPrior, KnownVarModel};
use crate::linreg_unknown::NigPrior;
use crate::logistic::BbbConfig;
use crate::model::{Model, ModelKind};
use crate::strategies::{StrategyConfig, StrategyKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Polynomial prior for the polynomial setting, standard normal otherwise.
    #[default]
    Auto,
    Standard,
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Noise variance assumed by the known-variance model.
    pub sigma2: f64,
    pub prior: PriorKind,
    pub a0: f64,
    pub b0: f64,
    pub em_iters: Option<usize>,
    pub bbb: BbbConfig,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { sigma2: 1.0, prior: PriorKind::Auto, a0: 2.0, b0: 2.0, em_iters: None, bbb: BbbConfig::default() }
    }
}

impl ModelParams {
    fn gaussian_prior(&self, d: usize, setting: Option<Setting>) -> Result<GaussianPrior> {
        let poly = match self.prior {
            PriorKind::Auto => setting == Some(Setting::Polynomial),
            PriorKind::Standard => false,
            PriorKind::Polynomial => true,
        };
        if poly {
            polynomial_prior(d)
        } else {
            Ok(GaussianPrior::standard(d))
        }
    }

    /// Builds a model of dimension `d`. `setting` only steers the automatic prior.
    pub fn build(&self, kind: ModelKind, d: usize, setting: Option<Setting>, em_iters: usize) -> Result<Model> {
        let prior = self.gaussian_prior(d, setting)?;
        Ok(match kind {
            ModelKind::LinregKnown => Model::LinregKnown(KnownVarModel::new(self.sigma2, prior)?),
            ModelKind::LinregUnknown => Model::LinregUnknown(NigPrior::new(prior, self.a0, self.b0)?),
            ModelKind::LogisticJaakkola => {
                Model::LogisticJaakkola { prior, em_iters: self.em_iters.unwrap_or(em_iters) }
            }
            ModelKind::LogisticBbb => {
                if self.prior == PriorKind::Polynomial {
                    return Err(Error::InvalidInput("Bayes-by-Backprop uses a standard normal prior".into()));
                }
                Model::LogisticBbb(self.bbb)
            }
        })
    }
}

fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}
fn default_repetitions() -> usize {
    30
}
fn default_grid_points() -> usize {
    50
}
fn default_test_multiplier() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub model_params: ModelParams,
    pub dataset: DatasetSpec,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default)]
    pub bounds: AlphaBounds,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_test_multiplier")]
    pub test_multiplier: usize,
    #[serde(default, alias = "seeds")]
    pub seed: u64,
    #[serde(default)]
    pub strategy_cfg: StrategyConfig,
    /// Record strategy wall time; off by default so output files are reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelKind, dataset: DatasetSpec) -> Self {
        Self {
            model,
            model_params: ModelParams::default(),
            dataset,
            strategies: default_strategies(),
            bounds: AlphaBounds::default(),
            repetitions: default_repetitions(),
            grid_points: default_grid_points(),
            test_multiplier: default_test_multiplier(),
            seed: 0,
            strategy_cfg: StrategyConfig::default(),
            record_wall_time: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(s)?;
        cfg.strategy_cfg.bounds = cfg.bounds;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Strategy settings with the experiment-level bounds applied.
    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig { bounds: self.bounds, ..self.strategy_cfg.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.dataset.validate()?;
        self.strategy_config().validate()?;
        if self.repetitions < 1 {
            return Err(Error::InvalidInput("repetitions must be >= 1".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidInput("grid_points must be >= 2".into()));
        }
        if self.test_multiplier < 1 {
            return Err(Error::InvalidInput("test_multiplier must be >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidInput("at least one strategy is required".into()));
        }
        if self.model.data_kind() != self.dataset.data_kind() {
            return Err(Error::InvalidInput(format!(
                "setting {} is incompatible with model {}",
                self.dataset.setting.name(),
                self.model.name()
            )));
        }
        self.build_model()?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<Model> {
        self.model_params.build(
            self.model,
            self.dataset.dim(),
            Some(self.dataset.setting),
            self.strategy_cfg.em_iters,
        )
    }
}
