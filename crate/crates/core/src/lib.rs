//! Temperature calibration for tempered (α-) posteriors.

pub mod alpha;
pub mod config;
pub mod data;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod linreg_known;
pub mod linreg_unknown;
pub mod logistic;
pub mod minimize;
pub mod model;
pub mod random;
pub mod risk;
pub mod sgd;
pub mod special;
pub mod strategies;

pub use alpha::{AlphaBounds, StrategyOutcome};
pub use data::{DataKind, Dataset, SufficientStats};
pub use error::{Error, Result};
