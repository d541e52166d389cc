//! Repeated synthetic experiments: oracle risks, α* search, strategy comparison.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{AlphaBounds, StrategyOutcome};
use crate::config::ExperimentConfig;
use crate::data::{Dataset, SufficientStats};
use crate::datasets::GroundTruth;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, SpdFactor};
use crate::logistic::{logistic_risk, logistic_risk_grad};
use crate::minimize::minimize_alpha;
use crate::model::{Model, ModelKind, Posterior};
use crate::random::{rng_stream, SeededRng};
use crate::special::sigmoid;
use crate::strategies::{estimate_objective, run_strategy, StrategyConfig, StrategyKind};

const FIT_STREAM: u64 = 11;
const ORACLE_STREAM: u64 = 12;
const TEST_STREAM: u64 = 13;
const STRATEGY_STREAM: u64 = 100;

fn fit_rng(seed: u64) -> SeededRng {
    rng_stream(seed, FIT_STREAM)
}

/// Seed of the held-out test set of a repetition.
pub fn test_seed(rep_seed: u64) -> u64 {
    use rand::Rng;
    rng_stream(rep_seed, TEST_STREAM).random()
}

/// Expected risk of a posterior on a large held-out sample.
///
/// Closed form for the two linear models, Monte-Carlo with `mc` draws from a
/// fixed stream of `seed` for the logistic models.
pub fn oracle_risk(model: &Model, post: &Posterior, test: &OracleData, mc: usize, seed: u64) -> Result<f64> {
    match model.kind() {
        ModelKind::LinregKnown | ModelKind::LinregUnknown => model.exact_risk(post, &test.stats),
        _ => {
            let mut rng = rng_stream(seed, ORACLE_STREAM);
            Ok(model.mc_risk(post, &model.evaluator(&test.data), mc, &mut rng)?.value)
        }
    }
}

/// Held-out data with its statistics cached.
#[derive(Debug, Clone)]
pub struct OracleData {
    pub data: Dataset,
    pub stats: SufficientStats,
}

impl OracleData {
    pub fn new(data: Dataset) -> Self {
        let stats = data.stats();
        Self { data, stats }
    }
}

/// `𝓡(α)` for posteriors fit on `train`.
pub fn oracle_at(
    model: &Model,
    train: &Dataset,
    test: &OracleData,
    alpha: f64,
    mc: usize,
    seed: u64,
) -> Result<f64> {
    let post = model.fit(train, alpha, &mut fit_rng(seed))?;
    oracle_risk(model, &post, test, mc, seed)
}

/// Smallest plug-in risk on the held-out sample.
///
/// Least squares for the linear models (with the MLE variance for the
/// unknown-variance model); damped Newton on the logistic risk otherwise.
pub fn min_prediction_risk(model: &Model, test: &OracleData) -> Result<f64> {
    let s = &test.stats;
    let m = s.n as f64;
    match model {
        Model::LinregKnown(k) => {
            let theta = least_squares(test.data.z(), test.data.y())?;
            Ok(s.rss(&theta) / (2.0 * k.sigma2 * m))
        }
        Model::LinregUnknown(_) => {
            let theta = least_squares(test.data.z(), test.data.y())?;
            let sigma2 = (s.rss(&theta) / m).max(f64::MIN_POSITIVE);
            Ok(0.5 + 0.5 * sigma2.ln() + crate::linreg_unknown::half_ln_2pi())
        }
        _ => Ok(logistic_risk(&logistic_newton(&test.data)?, &test.data)),
    }
}

/// Minimizer of the mean logistic loss by damped Newton steps.
pub fn logistic_newton(data: &Dataset) -> Result<DVector<f64>> {
    let d = data.d();
    let m = data.n() as f64;
    let mut theta = DVector::zeros(d);
    let mut risk = logistic_risk(&theta, data);
    for _ in 0..100 {
        let g = logistic_risk_grad(&theta, data);
        if g.amax() < 1e-10 {
            break;
        }
        let u = data.z() * &theta;
        let mut h = DMatrix::zeros(d, d);
        for i in 0..data.n() {
            let p = sigmoid(u[i]);
            let z = data.row(i);
            h.ger(p * (1.0 - p) / m, &z, &z, 1.0);
        }
        for j in 0..d {
            h[(j, j)] += 1e-10;
        }
        let step = SpdFactor::new(&h)?.solve(&g);
        let mut t = 1.0;
        loop {
            let cand = &theta - &step * t;
            let r = logistic_risk(&cand, data);
            if r <= risk - 1e-4 * t * g.dot(&step) || t < 1e-8 {
                theta = cand;
                risk = r;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub alpha_over_n: f64,
    pub estimate: f64,
    /// `NaN` when no held-out data is available.
    pub oracle: f64,
}

/// The strategy's risk estimate and the oracle risk on a grid over the bounds.
#[allow(clippy::too_many_arguments)]
pub fn risk_curve_on(
    model: &Model,
    strategy: StrategyKind,
    data: &Dataset,
    test: Option<&OracleData>,
    bounds: &AlphaBounds,
    grid_points: usize,
    cfg: &StrategyConfig,
    seed: u64,
) -> Result<Vec<CurveRow>> {
    if grid_points < 2 {
        return Err(Error::InvalidInput("curve needs at least 2 grid points".into()));
    }
    model.check_data(data)?;
    let n = data.n();
    let mut rows = Vec::with_capacity(grid_points);
    for (i, alpha) in bounds.grid(n, grid_points).into_iter().enumerate() {
        let mut rng = rng_stream(seed, 1000 + i as u64);
        let estimate = estimate_objective(strategy, data, model, cfg, alpha, &mut rng)?;
        let oracle = match test {
            Some(t) => oracle_at(model, data, t, alpha, cfg.mc, seed)?,
            None => f64::NAN,
        };
        rows.push(CurveRow { alpha_over_n: alpha / n as f64, estimate, oracle });
    }
    Ok(rows)
}

/// Data, ground truth and held-out sample of repetition `index`.
pub fn repetition_data(cfg: &ExperimentConfig, index: usize) -> Result<(Dataset, GroundTruth, OracleData)> {
    let rep_seed = cfg.seed.wrapping_add(index as u64);
    let truth = cfg.dataset.truth(rep_seed)?;
    let design_seed = if cfg.dataset.freeze_design { cfg.seed } else { rep_seed };
    let data = truth.sample_with_design(cfg.dataset.n, design_seed, rep_seed)?;
    let m = cfg.test_multiplier * cfg.dataset.n;
    let ts = test_seed(rep_seed);
    let test = OracleData::new(truth.sample(m, ts)?);
    Ok((data, truth, test))
}

/// [`risk_curve_on`] for repetition `index` of an experiment.
pub fn risk_curve(cfg: &ExperimentConfig, index: usize, strategy: StrategyKind) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let (data, _, test) = repetition_data(cfg, index)?;
    let model = cfg.build_model()?;
    let rep_seed = cfg.seed.wrapping_add(index as u64);
    risk_curve_on(&model, strategy, &data, Some(&test), &cfg.bounds, cfg.grid_points, &cfg.strategy_config(), rep_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub repetition: usize,
    pub strategy: StrategyKind,
    pub outcome: StrategyOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub repetition: usize,
    pub alpha_star: f64,
    pub alpha_star_over_n: f64,
    pub oracle_risk: f64,
    pub min_prediction_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub repetition: usize,
    /// `None` when the whole repetition failed.
    pub strategy: Option<StrategyKind>,
    pub numerical: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub oracle: Vec<OracleRow>,
    pub failures: Vec<Failure>,
}

impl ExperimentResult {
    pub fn partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn cells_for(&self, strategy: StrategyKind) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.strategy == strategy)
    }
}

struct RepetitionOutput {
    cells: Vec<CellResult>,
    oracle: Option<OracleRow>,
    failures: Vec<Failure>,
}

fn failure(repetition: usize, strategy: Option<StrategyKind>, e: &Error) -> Failure {
    Failure { repetition, strategy, numerical: !e.is_config_error(), message: e.to_string() }
}

fn alpha_star(model: &Model, data: &Dataset, test: &OracleData, cfg: &ExperimentConfig, seed: u64) -> Result<(f64, f64)> {
    let n = data.n();
    let mc = cfg.strategy_cfg.mc;
    let f = |a: f64| oracle_at(model, data, test, a, mc, seed);
    if model.kind().has_exact_risk() {
        let (lo, hi) = cfg.bounds.scaled(n);
        let m = minimize_alpha(f, lo, hi, n)?;
        Ok((m.x, m.value))
    } else {
        let mut best = (f64::NAN, f64::INFINITY);
        for a in cfg.bounds.grid(n, cfg.grid_points) {
            let v = f(a)?;
            if v < best.1 {
                best = (a, v);
            }
        }
        Ok(best)
    }
}

fn run_repetition(cfg: &ExperimentConfig, model: &Model, index: usize) -> RepetitionOutput {
    let mut out = RepetitionOutput { cells: Vec::new(), oracle: None, failures: Vec::new() };
    let (data, _, test) = match repetition_data(cfg, index) {
        Ok(v) => v,
        Err(e) => {
            out.failures.push(failure(index, None, &e));
            return out;
        }
    };
    let rep_seed = cfg.seed.wrapping_add(index as u64);
    let n = data.n();
    let scfg = cfg.strategy_config();
    let mc = scfg.mc;
    for (k, &strategy) in cfg.strategies.iter().enumerate() {
        let mut rng = rng_stream(rep_seed, STRATEGY_STREAM + k as u64);
        let start = Instant::now();
        let res = run_strategy(strategy, &data, model, &scfg, &mut rng);
        let elapsed = if cfg.record_wall_time { start.elapsed().as_millis() as u64 } else { 0 };
        match res.and_then(|alpha| Ok((alpha, oracle_at(model, &data, &test, alpha, mc, rep_seed)?))) {
            Ok((alpha, risk)) => out.cells.push(CellResult {
                repetition: index,
                strategy,
                outcome: StrategyOutcome::new(alpha, n, risk, elapsed),
            }),
            Err(e) => out.failures.push(failure(index, Some(strategy), &e)),
        }
    }
    let star = alpha_star(model, &data, &test, cfg, rep_seed);
    let min_pred = min_prediction_risk(model, &test);
    match (star, min_pred) {
        (Ok((a, r)), Ok(p)) => {
            out.oracle = Some(OracleRow {
                repetition: index,
                alpha_star: a,
                alpha_star_over_n: a / n as f64,
                oracle_risk: r,
                min_prediction_risk: p,
            })
        }
        (Err(e), _) | (_, Err(e)) => out.failures.push(failure(index, None, &e)),
    }
    out
}

/// Runs every repetition (in parallel) and merges the results by repetition index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    let outputs: Vec<RepetitionOutput> =
        (0..cfg.repetitions).into_par_iter().map(|i| run_repetition(cfg, &model, i)).collect();
    let mut result = ExperimentResult { config: cfg.clone(), cells: Vec::new(), oracle: Vec::new(), failures: Vec::new() };
    for o in outputs {
        result.cells.extend(o.cells);
        result.oracle.extend(o.oracle);
        result.failures.extend(o.failures);
    }
    Ok(result)
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    /// Strategy name, `alpha_star` for `𝓡(α*)`, or `min_prediction` for `min_θ R(θ)`.
    pub label: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Median of the selected α/n (`NaN` for `min_prediction`).
    pub median_alpha_over_n: f64,
}

fn five_numbers(label: &str, mut risks: Vec<f64>, mut alphas: Vec<f64>) -> Option<SummaryRow> {
    if risks.is_empty() {
        return None;
    }
    risks.sort_by(f64::total_cmp);
    alphas.sort_by(f64::total_cmp);
    Some(SummaryRow {
        label: label.to_string(),
        count: risks.len(),
        min: risks[0],
        q1: quantile_sorted(&risks, 0.25),
        median: quantile_sorted(&risks, 0.5),
        q3: quantile_sorted(&risks, 0.75),
        max: risks[risks.len() - 1],
        median_alpha_over_n: if alphas.is_empty() { f64::NAN } else { quantile_sorted(&alphas, 0.5) },
    })
}

/// Five-number summaries of oracle risk per strategy, plus `𝓡(α*)` and `min_θ R(θ)`.
pub fn summarize_boxplot(result: &ExperimentResult) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &s in &result.config.strategies {
        let (r, a): (Vec<f64>, Vec<f64>) =
            result.cells_for(s).map(|c| (c.outcome.oracle_risk, c.outcome.alpha_over_n)).unzip();
        rows.extend(five_numbers(s.name(), r, a));
    }
    let (r, a): (Vec<f64>, Vec<f64>) = result.oracle.iter().map(|o| (o.oracle_risk, o.alpha_star_over_n)).unzip();
    rows.extend(five_numbers("alpha_star", r, a));
    let r: Vec<f64> = result.oracle.iter().map(|o| o.min_prediction_risk).collect();
    rows.extend(five_numbers("min_prediction", r, Vec::new()));
    rows
}

pub const RESULTS_HEADER: &str = "repetition,strategy,alpha,alpha_over_n,oracle_risk,wall_time_ms";
pub const ORACLE_HEADER: &str = "repetition,alpha_star,alpha_star_over_n,oracle_risk,min_prediction_risk";
pub const SUMMARY_HEADER: &str = "label,count,min,q1,median,q3,max,median_alpha_over_n";
pub const CURVE_HEADER: &str = "alpha_over_n,estimate,oracle";

/// Results CSV; the optional first line is a `# generated_unix=<seconds>` comment.
pub fn results_csv(result: &ExperimentResult, timestamp: Option<u64>) -> String {
    let mut s = String::new();
    if let Some(ts) = timestamp {
        let _ = writeln!(s, "# generated_unix={ts}");
    }
    let _ = writeln!(s, "{RESULTS_HEADER}");
    for c in &result.cells {
        let o = &c.outcome;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            c.repetition,
            c.strategy.name(),
            o.alpha,
            o.alpha_over_n,
            o.oracle_risk,
            o.wall_time_ms
        );
    }
    s
}

pub fn oracle_csv(result: &ExperimentResult) -> String {
    let mut s = format!("{ORACLE_HEADER}\n");
    for o in &result.oracle {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            o.repetition, o.alpha_star, o.alpha_star_over_n, o.oracle_risk, o.min_prediction_risk
        );
    }
    s
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.label, r.count, r.min, r.q1, r.median, r.q3, r.max, r.median_alpha_over_n
        );
    }
    s
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.alpha_over_n, r.estimate, r.oracle);
    }
    s
}

#[derive(Serialize)]
struct FailureManifest<'a> {
    partial: bool,
    completed_cells: usize,
    failures: &'a [Failure],
}

pub fn failures_json(result: &ExperimentResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(&FailureManifest {
        partial: result.partial(),
        completed_cells: result.cells.len(),
        failures: &result.failures,
    })?)
}

/// Writes results.csv, oracle.csv, summary.csv, failures.json and results.json.
pub fn write_outputs<P: AsRef<Path>>(result: &ExperimentResult, dir: P, timestamp: Option<u64>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_csv(result, timestamp))?;
    std::fs::write(dir.join("oracle.csv"), oracle_csv(result))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(&summarize_boxplot(result)))?;
    std::fs::write(dir.join("failures.json"), failures_json(result)?)?;
    std::fs::write(dir.join("results.json"), serde_json::to_string_pretty(result)?)?;
    Ok(())
}
