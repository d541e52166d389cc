//! Python bindings. Matrices cross the boundary as lists of rows.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use tempcal::config::{ExperimentConfig, ModelParams};
use tempcal::datasets::{DatasetSpec, GroundTruth, Setting, TrueFunction};
use tempcal::harness::{risk_curve_on, run_experiment as run, summarize_boxplot, summary_csv, test_seed, OracleData};
use tempcal::linreg_known::{GaussianPrior, KnownVarModel};
use tempcal::model::{Model, ModelKind};
use tempcal::random::rng_from_seed;
use tempcal::strategies::{run_strategy, StrategyConfig, StrategyKind};
use tempcal::{AlphaBounds, Dataset};

type Rows = Vec<Vec<f64>>;

fn py_err(e: tempcal::Error) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_matrix(rows: &Rows) -> tempcal::Result<DMatrix<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(tempcal::Error::InvalidInput("rows of z must have equal length".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]))
}

fn from_matrix(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn dataset(z: &Rows, y: Vec<f64>, kind: ModelKind) -> tempcal::Result<Dataset> {
    Dataset::new(to_matrix(z)?, DVector::from_vec(y), kind.data_kind())
}

fn strategy_config(lo: f64, hi: f64, strategy_cfg: Option<&str>) -> tempcal::Result<StrategyConfig> {
    let mut cfg: StrategyConfig = match strategy_cfg {
        Some(s) => serde_json::from_str(s)?,
        None => StrategyConfig::default(),
    };
    cfg.bounds = AlphaBounds::new(lo, hi)?;
    cfg.validate()?;
    Ok(cfg)
}

fn build_model(name: &str, d: usize, params: Option<&str>, cfg: &StrategyConfig) -> tempcal::Result<Model> {
    let params: ModelParams = match params {
        Some(s) => serde_json::from_str(s)?,
        None => ModelParams::default(),
    };
    params.build(ModelKind::parse(name)?, d, None, cfg.em_iters)
}

/// Synthetic dataset: returns `(z, y, truth_json)`.
#[pyfunction]
#[pyo3(signature = (setting, n, d, seed=0, sigma2=None, delta2=None, p=None, half_width=None, function=None))]
#[allow(clippy::too_many_arguments)]
fn gen_data(
    setting: &str,
    n: usize,
    d: usize,
    seed: u64,
    sigma2: Option<f64>,
    delta2: Option<f64>,
    p: Option<f64>,
    half_width: Option<f64>,
    function: Option<&str>,
) -> PyResult<(Rows, Vec<f64>, String)> {
    let mut spec = DatasetSpec::new(Setting::parse(setting).map_err(py_err)?, n, d);
    spec.sigma2 = sigma2.unwrap_or(spec.sigma2);
    spec.delta2 = delta2.unwrap_or(spec.delta2);
    spec.p = p.unwrap_or(spec.p);
    spec.half_width = half_width.unwrap_or(spec.half_width);
    if let Some(f) = function {
        spec.function = TrueFunction::parse(f).map_err(py_err)?;
    }
    let (data, truth) = spec.generate(seed).map_err(py_err)?;
    Ok((from_matrix(data.z()), data.y().iter().copied().collect(), truth.to_json().map_err(py_err)?))
}

/// Runs one strategy and returns the chosen α (unnormalized).
#[pyfunction]
#[pyo3(signature = (model, strategy, z, y, seed=0, lo=0.0, hi=3.0, strategy_cfg=None, model_params=None))]
#[allow(clippy::too_many_arguments)]
fn calibrate(
    model: &str,
    strategy: &str,
    z: Rows,
    y: Vec<f64>,
    seed: u64,
    lo: f64,
    hi: f64,
    strategy_cfg: Option<&str>,
    model_params: Option<&str>,
) -> PyResult<f64> {
    let kind = ModelKind::parse(model).map_err(py_err)?;
    let strategy = StrategyKind::parse(strategy).map_err(py_err)?;
    let cfg = strategy_config(lo, hi, strategy_cfg).map_err(py_err)?;
    let data = dataset(&z, y, kind).map_err(py_err)?;
    let m = build_model(model, data.d(), model_params, &cfg).map_err(py_err)?;
    run_strategy(strategy, &data, &m, &cfg, &mut rng_from_seed(seed)).map_err(py_err)
}

/// Known-variance α-posterior under a standard normal prior: `(mean, cov)`.
#[pyfunction]
#[pyo3(signature = (z, y, alpha, sigma2=1.0))]
fn fit_linreg_known(z: Rows, y: Vec<f64>, alpha: f64, sigma2: f64) -> PyResult<(Vec<f64>, Rows)> {
    let data = dataset(&z, y, ModelKind::LinregKnown).map_err(py_err)?;
    let m = KnownVarModel::new(sigma2, GaussianPrior::standard(data.d())).map_err(py_err)?;
    let post = m.fit(&data, alpha).map_err(py_err)?;
    Ok((post.mean.iter().copied().collect(), from_matrix(&post.cov)))
}

/// Closed-form expected empirical risk on `(z_eval, y_eval)` of the posterior fit on `(z_fit, y_fit)`.
#[pyfunction]
#[pyo3(signature = (z_fit, y_fit, z_eval, y_eval, alpha, sigma2=1.0))]
fn gen_error_estimate(
    z_fit: Rows,
    y_fit: Vec<f64>,
    z_eval: Rows,
    y_eval: Vec<f64>,
    alpha: f64,
    sigma2: f64,
) -> PyResult<f64> {
    let fit = dataset(&z_fit, y_fit, ModelKind::LinregKnown).map_err(py_err)?;
    let eval = dataset(&z_eval, y_eval, ModelKind::LinregKnown).map_err(py_err)?;
    let m = KnownVarModel::new(sigma2, GaussianPrior::standard(fit.d())).map_err(py_err)?;
    let post = m.fit(&fit, alpha).map_err(py_err)?;
    m.gen_error_estimate(&post, &eval).map_err(py_err)
}

/// `[(α/n, estimate, oracle)]` over `grid` points; the oracle is NaN without `truth_json`.
#[pyfunction]
#[pyo3(signature = (model, strategy, z, y, grid, seed=0, truth_json=None, test_multiplier=100, lo=0.0, hi=3.0, strategy_cfg=None, model_params=None))]
#[allow(clippy::too_many_arguments)]
fn risk_curve(
    model: &str,
    strategy: &str,
    z: Rows,
    y: Vec<f64>,
    grid: usize,
    seed: u64,
    truth_json: Option<&str>,
    test_multiplier: usize,
    lo: f64,
    hi: f64,
    strategy_cfg: Option<&str>,
    model_params: Option<&str>,
) -> PyResult<Vec<(f64, f64, f64)>> {
    let kind = ModelKind::parse(model).map_err(py_err)?;
    let strategy = StrategyKind::parse(strategy).map_err(py_err)?;
    let cfg = strategy_config(lo, hi, strategy_cfg).map_err(py_err)?;
    let data = dataset(&z, y, kind).map_err(py_err)?;
    let m = build_model(model, data.d(), model_params, &cfg).map_err(py_err)?;
    let test = match truth_json {
        Some(t) => {
            let truth = GroundTruth::from_json(t).map_err(py_err)?;
            Some(OracleData::new(truth.sample(test_multiplier * data.n(), test_seed(seed)).map_err(py_err)?))
        }
        None => None,
    };
    let rows = risk_curve_on(&m, strategy, &data, test.as_ref(), &cfg.bounds, grid, &cfg, seed).map_err(py_err)?;
    Ok(rows.into_iter().map(|r| (r.alpha_over_n, r.estimate, r.oracle)).collect())
}

/// Runs an experiment from its JSON config: `(result_json, summary_csv)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_json: &str) -> PyResult<(String, String)> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(py_err)?;
    let result = py.detach(|| run(&cfg)).map_err(py_err)?;
    let json = serde_json::to_string(&result).map_err(|e| py_err(e.into()))?;
    Ok((json, summary_csv(&summarize_boxplot(&result))))
}

/// `(σ(v) − ½)/(2v)`.
#[pyfunction]
fn lambda_of_v(v: f64) -> f64 {
    tempcal::logistic::lambda_of_v(v)
}

#[pymodule]
fn tempcal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gen_data, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linreg_known, m)?)?;
    m.add_function(wrap_pyfunction!(gen_error_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(risk_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_of_v, m)?)?;
    Ok(())
}
