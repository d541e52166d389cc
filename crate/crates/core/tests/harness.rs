mod common;

use nalgebra::DMatrix;
use tempcal::config::ExperimentConfig;
use tempcal::datasets::{DatasetSpec, Setting};
use tempcal::harness::{
    min_prediction_risk, oracle_at, oracle_risk, repetition_data, results_csv, risk_curve, run_experiment,
    summarize_boxplot, write_outputs, CellResult, ExperimentResult, OracleData, OracleRow,
};
use tempcal::linreg_known::GaussianPosterior;
use tempcal::model::{ModelKind, Posterior};
use tempcal::strategies::StrategyKind;
use tempcal::{AlphaBounds, StrategyOutcome};

fn small_config(model: ModelKind, setting: Setting, n: usize, d: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(model, DatasetSpec::new(setting, n, d));
    cfg.repetitions = 4;
    cfg.test_multiplier = 50;
    cfg.strategy_cfg.mc = 100;
    cfg.strategy_cfg.boot = 10;
    cfg.strategy_cfg.sgd.max_iters = 30;
    cfg
}

#[test]
fn delta_posterior_at_truth_has_half_risk() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 50, 3);
    cfg.test_multiplier = 2000;
    let (_, truth, test) = repetition_data(&cfg, 0).unwrap();
    let post = Posterior::Gaussian(GaussianPosterior { mean: truth.theta().unwrap(), cov: DMatrix::zeros(3, 3) });
    let model = cfg.build_model().unwrap();
    let r = oracle_risk(&model, &post, &test, 0, 0).unwrap();
    // ε²/2 has variance ½
    let se = (0.5 / test.data.n() as f64).sqrt();
    assert!((r - 0.5).abs() < 4.0 * se, "{r}");
}

#[test]
fn bayes_posterior_beats_prior() {
    let cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 40, 4);
    let model = cfg.build_model().unwrap();
    for rep in 0..3 {
        let (data, _, test) = repetition_data(&cfg, rep).unwrap();
        let prior = oracle_at(&model, &data, &test, 0.0, 0, 0).unwrap();
        let bayes = oracle_at(&model, &data, &test, 40.0, 0, 0).unwrap();
        assert!(bayes < prior, "{bayes} vs {prior}");
    }
}

#[test]
fn oracle_stable_under_larger_test_sample() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 30, 3);
    cfg.test_multiplier = 100;
    let (data, _, small) = repetition_data(&cfg, 0).unwrap();
    cfg.test_multiplier = 200;
    let (_, _, large) = repetition_data(&cfg, 0).unwrap();
    let model = cfg.build_model().unwrap();
    let post = model.fit(&data, 30.0, &mut tempcal::random::rng_from_seed(0)).unwrap();
    let losses: Vec<f64> = (0..small.data.n())
        .map(|i| {
            let z = small.data.row(i);
            let r = small.data.y()[i] - z.dot(post.mean());
            r * r / 2.0
        })
        .collect();
    let (_, se) = common::mean_se(&losses);
    let a = oracle_risk(&model, &post, &small, 0, 0).unwrap();
    let b = oracle_risk(&model, &post, &large, 0, 0).unwrap();
    assert!((a - b).abs() < 2.0 * se, "{a} vs {b} (se {se})");
}

#[test]
fn min_prediction_is_least_squares_risk() {
    let cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 30, 3);
    let (_, _, test) = repetition_data(&cfg, 1).unwrap();
    let model = cfg.build_model().unwrap();
    let z = test.data.z();
    let theta = (z.transpose() * z).try_inverse().unwrap() * z.transpose() * test.data.y();
    let want = (test.data.y() - z * theta).norm_squared() / (2.0 * test.data.n() as f64);
    assert!(common::rel_err(min_prediction_risk(&model, &test).unwrap(), want) < 1e-9);
}

#[test]
fn logistic_min_prediction_has_zero_gradient() {
    let cfg = small_config(ModelKind::LogisticJaakkola, Setting::Logistic, 40, 3);
    let (_, _, test) = repetition_data(&cfg, 0).unwrap();
    let theta = tempcal::harness::logistic_newton(&test.data).unwrap();
    assert!(tempcal::logistic::logistic_risk_grad(&theta, &test.data).amax() < 1e-8);
    let model = cfg.build_model().unwrap();
    let r = min_prediction_risk(&model, &OracleData::new(test.data.clone())).unwrap();
    assert!(r <= tempcal::logistic::logistic_risk(&nalgebra::DVector::zeros(3), &test.data));
}

#[test]
fn curve_endpoints_match_bounds() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 20, 2);
    cfg.bounds = AlphaBounds::new(0.25, 2.5).unwrap();
    cfg.grid_points = 7;
    let rows = risk_curve(&cfg, 0, StrategyKind::SampleSplit).unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0].alpha_over_n, 0.25);
    assert_eq!(rows[6].alpha_over_n, 2.5);
    assert!(rows.iter().all(|r| r.oracle.is_finite() && r.estimate.is_finite()));
}

#[test]
fn polynomial_curve_has_interior_minimum() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Polynomial, 30, 12);
    cfg.dataset.sigma2 = 0.5;
    cfg.model_params.sigma2 = 0.01;
    cfg.grid_points = 60;
    let rows = risk_curve(&cfg, 0, StrategyKind::SampleSplit).unwrap();
    let (imin, best) = rows.iter().enumerate().min_by(|a, b| a.1.oracle.total_cmp(&b.1.oracle)).unwrap();
    assert!(imin > 0 && imin < rows.len() - 1, "minimum at index {imin}");
    assert!(rows[rows.len() - 1].oracle > best.oracle);
}

#[test]
fn gaussian_mean_curve_non_increasing() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::GaussianMean, 40, 1);
    cfg.grid_points = 30;
    let rows = risk_curve(&cfg, 0, StrategyKind::Naive).unwrap();
    for w in rows.windows(2).skip(1) {
        assert!(w[1].oracle <= w[0].oracle + 1e-3, "{:?}", w);
    }
}

#[test]
fn single_bayes_repetition() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 25, 2);
    cfg.repetitions = 1;
    cfg.strategies = vec![StrategyKind::Bayes];
    let res = run_experiment(&cfg).unwrap();
    assert_eq!(res.cells.len(), 1);
    assert_eq!(res.cells[0].outcome.alpha_over_n, 1.0);
    assert_eq!(res.oracle.len(), 1);
    assert!(!res.partial());
}

#[test]
fn runs_are_reproducible() {
    let cfg = small_config(ModelKind::LinregUnknown, Setting::Linreg, 20, 3);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(results_csv(&a, None), results_csv(&b, None));
    let base = std::env::temp_dir().join(format!("tempcal-harness-{}", std::process::id()));
    let (da, db) = (base.join("a"), base.join("b"));
    write_outputs(&a, &da, None).unwrap();
    write_outputs(&b, &db, None).unwrap();
    for f in ["results.csv", "oracle.csv", "summary.csv", "failures.json", "results.json"] {
        assert_eq!(std::fs::read(da.join(f)).unwrap(), std::fs::read(db.join(f)).unwrap(), "{f}");
    }
    std::fs::remove_dir_all(&base).unwrap();
}

#[test]
fn repetitions_use_consecutive_seeds() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 15, 2);
    let (second, _, _) = repetition_data(&cfg, 1).unwrap();
    cfg.seed = 1;
    let (first, _, _) = repetition_data(&cfg, 0).unwrap();
    assert_eq!(first, second);
}

fn oracle_optimality(cfg: &ExperimentConfig) {
    let res = run_experiment(cfg).unwrap();
    assert!(!res.partial(), "{:?}", res.failures);
    for o in &res.oracle {
        assert!(o.min_prediction_risk <= o.oracle_risk, "{o:?}");
        for c in res.cells.iter().filter(|c| c.repetition == o.repetition) {
            assert!(c.outcome.oracle_risk >= o.oracle_risk - 1e-6 * o.oracle_risk.abs(), "{c:?} vs {o:?}");
            let (lo, hi) = cfg.bounds.scaled(cfg.dataset.n);
            assert!(c.outcome.alpha >= lo && c.outcome.alpha <= hi);
        }
    }
    let rows = summarize_boxplot(&res);
    let star = rows.iter().find(|r| r.label == "alpha_star").unwrap();
    for row in rows.iter().filter(|r| r.label != "alpha_star" && r.label != "min_prediction") {
        assert!(star.median <= row.median + 1e-9, "{row:?}");
    }
}

#[test]
fn oracle_lower_bounds_hold_known_variance() {
    oracle_optimality(&small_config(ModelKind::LinregKnown, Setting::Linreg, 20, 4));
}

#[test]
fn oracle_lower_bounds_hold_unknown_variance() {
    let mut cfg = small_config(ModelKind::LinregUnknown, Setting::Uniform, 20, 3);
    cfg.dataset.half_width = 2.0;
    oracle_optimality(&cfg);
}

fn cell(rep: usize, risk: f64) -> CellResult {
    CellResult { repetition: rep, strategy: StrategyKind::Bayes, outcome: StrategyOutcome::new(10.0, 10, risk, 0) }
}

fn synthetic(risks: &[f64]) -> ExperimentResult {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 10, 1);
    cfg.strategies = vec![StrategyKind::Bayes];
    ExperimentResult {
        config: cfg,
        cells: risks.iter().enumerate().map(|(i, &r)| cell(i, r)).collect(),
        oracle: risks
            .iter()
            .enumerate()
            .map(|(i, &r)| OracleRow {
                repetition: i,
                alpha_star: 5.0,
                alpha_star_over_n: 0.5,
                oracle_risk: r - 0.1,
                min_prediction_risk: r - 0.2,
            })
            .collect(),
        failures: Vec::new(),
    }
}

#[test]
fn summary_of_one_repetition_is_flat() {
    let rows = summarize_boxplot(&synthetic(&[1.5]));
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r.count, 1);
        assert!(r.min == r.q1 && r.q1 == r.median && r.median == r.q3 && r.q3 == r.max);
    }
}

#[test]
fn larger_risk_only_moves_the_max() {
    let base = [1.0, 2.0, 3.0, 4.0, 5.0];
    let a = &summarize_boxplot(&synthetic(&base))[0];
    let mut grown = base;
    grown[4] = 50.0;
    let b = &summarize_boxplot(&synthetic(&grown))[0];
    assert_eq!((a.min, a.q1, a.median, a.q3), (b.min, b.q1, b.median, b.q3));
    assert!(b.max > a.max);
    assert_eq!((a.q1, a.median, a.q3), (2.0, 3.0, 4.0));
}

#[test]
fn invalid_configs_fail_fast() {
    let mut cfg = small_config(ModelKind::LinregKnown, Setting::Logistic, 10, 2);
    assert!(run_experiment(&cfg).is_err());
    cfg = small_config(ModelKind::LinregKnown, Setting::Linreg, 10, 2);
    cfg.repetitions = 0;
    assert!(run_experiment(&cfg).is_err());
}
