use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use tempcal::config::{ExperimentConfig, ModelParams};
use tempcal::datasets::{DatasetSpec, GroundTruth, Setting, TrueFunction};
use tempcal::harness::{curve_csv, risk_curve_on, run_experiment, test_seed, write_outputs, OracleData};
use tempcal::model::ModelKind;
use tempcal::random::rng_from_seed;
use tempcal::strategies::{run_strategy, StrategyConfig, StrategyKind};
use tempcal::model::Model;
use tempcal::{AlphaBounds, Dataset, Result};

#[derive(Parser)]
#[command(name = "tempcal", version, about = "Temperature calibration for tempered posteriors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV, with its ground truth next to it.
    GenData(GenDataArgs),
    /// Choose α for a dataset with one strategy.
    Calibrate(CalibrateArgs),
    /// Tabulate a strategy's risk estimate (and the oracle risk, if known) over α.
    Curve(CurveArgs),
    /// Run a repeated experiment from a JSON config.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    setting: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Narrow-component variance of the gmm setting.
    #[arg(long)]
    delta2: Option<f64>,
    /// Wide-component probability of the gmm setting.
    #[arg(long)]
    p: Option<f64>,
    /// Half width of the uniform noise.
    #[arg(long)]
    half_width: Option<f64>,
    /// True function of the polynomial setting (parabola or exp).
    #[arg(long)]
    function: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Held-out size as a multiple of n when a ground-truth file is present.
    #[arg(long, default_value_t = 100)]
    test_multiplier: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Settings accepted by `calibrate --config` and `curve --config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    bounds: AlphaBounds,
    strategy_cfg: StrategyConfig,
    model_params: ModelParams,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => Self::default(),
        };
        cfg.strategy_cfg.bounds = cfg.bounds;
        cfg.strategy_cfg.validate()?;
        Ok(cfg)
    }
}

/// `data.csv` → `data.truth.json`.
fn truth_path(data: &Path) -> PathBuf {
    data.with_extension("truth.json")
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let mut spec = DatasetSpec::new(Setting::parse(&a.setting)?, a.n, a.d);
    if let Some(s) = a.sigma2 {
        spec.sigma2 = s;
    }
    if let Some(v) = a.delta2 {
        spec.delta2 = v;
    }
    if let Some(v) = a.p {
        spec.p = v;
    }
    if let Some(v) = a.half_width {
        spec.half_width = v;
    }
    if let Some(f) = &a.function {
        spec.function = TrueFunction::parse(f)?;
    }
    let (data, truth) = spec.generate(a.seed)?;
    data.write_csv(&a.out)?;
    truth.write_json(truth_path(&a.out))?;
    Ok(())
}

fn load_model_and_data(model: &str, data: &Path, params: &ModelParams, cfg: &StrategyConfig) -> Result<(Model, Dataset)> {
    let kind = ModelKind::parse(model)?;
    let data = Dataset::read_csv(data)?.with_kind(kind.data_kind())?;
    let model = params.build(kind, data.d(), None, cfg.em_iters)?;
    model.check_data(&data)?;
    Ok((model, data))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let strategy = StrategyKind::parse(&a.strategy)?;
    let cfg = RunConfig::load(a.config.as_deref())?;
    let (model, data) = load_model_and_data(&a.model, &a.data, &cfg.model_params, &cfg.strategy_cfg)?;
    let alpha = run_strategy(strategy, &data, &model, &cfg.strategy_cfg, &mut rng_from_seed(a.seed))?;
    let out = serde_json::json!({ "alpha": alpha, "alpha_over_n": alpha / data.n() as f64 });
    println!("{out}");
    Ok(())
}

fn curve(a: CurveArgs) -> Result<()> {
    let strategy = StrategyKind::parse(&a.strategy)?;
    let cfg = RunConfig::load(a.config.as_deref())?;
    let (model, data) = load_model_and_data(&a.model, &a.data, &cfg.model_params, &cfg.strategy_cfg)?;
    let tp = truth_path(&a.data);
    let test = if tp.exists() {
        let truth = GroundTruth::read_json(&tp)?;
        Some(OracleData::new(truth.sample(a.test_multiplier * data.n(), test_seed(a.seed))?))
    } else {
        None
    };
    let rows = risk_curve_on(&model, strategy, &data, test.as_ref(), &cfg.bounds, a.grid, &cfg.strategy_cfg, a.seed)?;
    std::fs::write(&a.out, curve_csv(&rows))?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<ExitCode> {
    let cfg = ExperimentConfig::read(&a.config)?;
    let result = run_experiment(&cfg)?;
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_outputs(&result, &a.out_dir, Some(ts))?;
    if result.partial() {
        eprintln!("{} failure(s) recorded in failures.json", result.failures.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.command {
        Command::GenData(a) => gen_data(a).map(|_| ExitCode::SUCCESS),
        Command::Calibrate(a) => calibrate(a).map(|_| ExitCode::SUCCESS),
        Command::Curve(a) => curve(a).map(|_| ExitCode::SUCCESS),
        Command::Experiment(a) => experiment(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
