mod common;

use common::{mean_se, rel_err, toy_regression};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use tempcal::datasets::{gen_gmm_noise, gen_linreg, gen_uniform_noise};
use tempcal::linreg_known::GaussianPrior;
use tempcal::linreg_unknown::{
    b_posterior_direct, fit_nig, gen_error_estimate_nig, half_ln_2pi, nig_moments, peprl_terms_nig, sample_nig,
    safebayes_peprl_nig, NigPosterior, NigPrior, NigRiskMode, NigSampler, PeprlForm,
};
use tempcal::random::rng_from_seed;
use tempcal::Dataset;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Independent joint sampler: `1/σ² ~ Gamma(a, rate b)`, `θ = μ + σ·Lε`.
fn oracle_draws(post: &NigPosterior, count: usize, seed: u64) -> Vec<(DVector<f64>, f64)> {
    let l = post.cov.clone().cholesky().unwrap().l();
    let gamma = Gamma::new(post.a, 1.0 / post.b).unwrap();
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let s2 = 1.0 / gamma.sample(&mut rng);
            let eps = DVector::from_fn(post.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            (&post.mean + &l * eps * s2.sqrt(), s2)
        })
        .collect()
}

fn oracle_risk(theta: &DVector<f64>, s2: f64, data: &Dataset) -> f64 {
    let rss = (data.y() - data.z() * theta).norm_squared();
    rss / (2.0 * s2 * data.n() as f64) + 0.5 * (2.0 * std::f64::consts::PI * s2).ln()
}

#[test]
fn fit_limits() {
    let data = toy_regression(40, 3, 1.0, 1);
    let prior = NigPrior::default_for(3);
    let p0 = fit_nig(&prior, &data, 0.0).unwrap();
    assert_eq!(p0, prior.as_posterior());
    assert_eq!(fit_nig(&NigPrior::default_for(3), &data, 4.0).unwrap().a, 4.0);

    let big = fit_nig(&prior, &data, 1e9).unwrap();
    let ztz = data.z().transpose() * data.z();
    let ls = ztz.try_inverse().unwrap() * data.z().transpose() * data.y();
    assert!((&big.mean - &ls).amax() < 1e-4);
}

#[test]
fn stable_b_matches_direct_formula() {
    for seed in 0..10 {
        let data = toy_regression(25, 3, 2.0, seed);
        let prior = NigPrior::new(
            GaussianPrior::new(DVector::from_vec(vec![0.3, -0.1, 1.0]), DMatrix::identity(3, 3) * 1.5).unwrap(),
            3.0,
            1.5,
        )
        .unwrap();
        for alpha in [0.5, 10.0, 25.0, 60.0] {
            let b = fit_nig(&prior, &data, alpha).unwrap().b;
            let direct = b_posterior_direct(&prior, &data.stats(), alpha).unwrap();
            assert!(rel_err(b, direct) < 1e-9, "seed {seed} α {alpha}: {b} vs {direct}");
        }
    }
}

#[test]
fn moments_hand_values() {
    let post = |a, b| NigPosterior { mean: DVector::zeros(1), cov: DMatrix::identity(1, 1), a, b };
    let m = nig_moments(&post(1.0, 1.0)).unwrap();
    assert!((m.e_inv_sigma2 - 1.0).abs() < 1e-15);
    assert!((m.e_log_sigma2 - EULER_GAMMA).abs() < 1e-10);
    assert_eq!(nig_moments(&post(2.0, 4.0)).unwrap().e_inv_sigma2, 0.5);
    assert!(nig_moments(&post(2.0, 0.0)).is_err());
    assert!(nig_moments(&post(0.0, 1.0)).is_err());
}

#[test]
fn moments_match_inverse_gamma_draws() {
    let post = NigPosterior { mean: DVector::zeros(1), cov: DMatrix::identity(1, 1), a: 3.5, b: 2.2 };
    let m = nig_moments(&post).unwrap();
    let gamma = Gamma::new(post.a, 1.0 / post.b).unwrap();
    let mut rng = rng_from_seed(11);
    let prec: Vec<f64> = (0..1_000_000).map(|_| gamma.sample(&mut rng)).collect();
    let logs: Vec<f64> = prec.iter().map(|p| -p.ln()).collect();
    let (mi, si) = mean_se(&prec);
    let (ml, sl) = mean_se(&logs);
    assert!((mi - m.e_inv_sigma2).abs() < 3.0 * si);
    assert!((ml - m.e_log_sigma2).abs() < 3.0 * sl);
}

#[test]
fn sampler_matches_moments_and_concentrates() {
    let post = NigPosterior {
        mean: DVector::from_vec(vec![1.0, -2.0]),
        cov: DMatrix::identity(2, 2) * 1e-10,
        a: 4.0,
        b: 3.0,
    };
    let sampler = NigSampler::new(&post).unwrap();
    let mut rng = rng_from_seed(2);
    let draws: Vec<_> = (0..1_000_000).map(|_| sampler.sample(&mut rng)).collect();
    let inv: Vec<f64> = draws.iter().map(|d| 1.0 / d.sigma2).collect();
    let (m, se) = mean_se(&inv);
    assert!((m - 4.0 / 3.0).abs() < 3.0 * se);
    for j in 0..2 {
        let col: Vec<f64> = draws.iter().take(100_000).map(|d| d.theta[j]).collect();
        let (m, se) = mean_se(&col);
        assert!((m - post.mean[j]).abs() < 3.0 * se.max(1e-12));
        assert!((m - post.mean[j]).abs() < 1e-4);
    }
    let a = sample_nig(&post, &mut rng_from_seed(5)).unwrap();
    let b = sample_nig(&post, &mut rng_from_seed(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn moment_form_matches_mc() {
    for (seed, d) in [(0u64, 1usize), (1, 3)] {
        let data = toy_regression(20, d, 1.0, 30 + seed);
        let (fit, eval) = data.split_halves().unwrap();
        let post = fit_nig(&NigPrior::default_for(d), &fit, 6.0).unwrap();
        let mut rng = rng_from_seed(0);
        let closed = gen_error_estimate_nig(&post, &eval, NigRiskMode::Moment, 0, &mut rng).unwrap();
        let vals: Vec<f64> = oracle_draws(&post, 1_000_000, seed).iter().map(|(t, s)| oracle_risk(t, *s, &eval)).collect();
        let (m, se) = mean_se(&vals);
        assert!((m - closed).abs() < 3.0 * se, "d {d}: mc {m} ± {se} vs {closed}");
        let mc = gen_error_estimate_nig(&post, &eval, NigRiskMode::MonteCarlo, 200_000, &mut rng).unwrap();
        assert!((mc - closed).abs() < 3.0 * se * (1_000_000f64 / 200_000.0).sqrt());
    }
}

#[test]
fn gamma_ratio_form_disagrees_with_sampling() {
    let data = toy_regression(20, 1, 1.0, 30);
    let (fit, eval) = data.split_halves().unwrap();
    let post = fit_nig(&NigPrior::default_for(1), &fit, 6.0).unwrap();
    let mut rng = rng_from_seed(0);
    let ratio = gen_error_estimate_nig(&post, &eval, NigRiskMode::GammaRatio, 0, &mut rng).unwrap();
    let vals: Vec<f64> = oracle_draws(&post, 1_000_000, 9).iter().map(|(t, s)| oracle_risk(t, *s, &eval)).collect();
    let (m, se) = mean_se(&vals);
    assert!((ratio - m).abs() > 10.0 * se, "{ratio} vs {m} ± {se}");
}

#[test]
fn concentrated_posterior_approaches_plug_in() {
    let data = toy_regression(400, 2, 1.0, 3);
    let post = fit_nig(&NigPrior::default_for(2), &data, 1e7).unwrap();
    let mut rng = rng_from_seed(0);
    let r = gen_error_estimate_nig(&post, &data, NigRiskMode::Moment, 0, &mut rng).unwrap();
    let plug = oracle_risk(&post.mean, post.b / post.a, &data);
    assert!(rel_err(r, plug) < 1e-4, "{r} vs {plug}");
}

#[test]
fn zero_residuals_leave_the_constant() {
    let z = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64 * 0.1);
    let mu = DVector::from_vec(vec![0.5, 1.5]);
    let data = Dataset::regression(z.clone(), &z * &mu).unwrap();
    let post = NigPosterior { mean: mu, cov: DMatrix::identity(2, 2) * 1e-12, a: 1e6, b: 1e6 };
    let r = gen_error_estimate_nig(&post, &data, NigRiskMode::Moment, 0, &mut rng_from_seed(0)).unwrap();
    assert!((r - 0.918_938_533_2).abs() < 1e-5);
    assert!((half_ln_2pi() - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
}

#[test]
fn peprl_two_unit_points_by_hand() {
    let data = Dataset::regression(DMatrix::from_element(2, 1, 1.0), DVector::from_element(2, 1.0)).unwrap();
    // S = ½, μ = ½, a = 2.5, b = 2 + ½(¼ + ¼)
    let (a, b) = (2.5f64, 2.25f64);
    let psi_a = -EULER_GAMMA - 2.0 * 2f64.ln() + 2.0 + 2.0 / 3.0;
    let expected = 0.5 * (a / b * 0.25 + 0.5) + 0.5 * (b.ln() - psi_a) + half_ln_2pi();
    let s = safebayes_peprl_nig(&NigPrior::default_for(1), &data, 1.0).unwrap();
    assert!((s - expected).abs() < 1e-12, "{s} vs {expected}");
}

#[test]
fn peprl_at_zero_is_prior_sum() {
    let data = toy_regression(6, 2, 1.0, 4);
    let prior = NigPrior::default_for(2);
    let terms = peprl_terms_nig(&prior, &data, 0.0, PeprlForm::Moment).unwrap();
    let mut rng = rng_from_seed(0);
    for t in 1..6 {
        let next = data.slice(t, t + 1).unwrap();
        let want = gen_error_estimate_nig(&prior.as_posterior(), &next, NigRiskMode::Moment, 0, &mut rng).unwrap();
        assert!(rel_err(terms[t - 1], want) < 1e-12);
    }
}

#[test]
fn peprl_matches_mc_over_prefix_posteriors() {
    let data = toy_regression(6, 2, 1.0, 21);
    let prior = NigPrior::default_for(2);
    let alpha = 3.0;
    let closed = safebayes_peprl_nig(&prior, &data, alpha).unwrap();
    let mut total = 0.0;
    let mut var = 0.0;
    for t in 1..6 {
        let post = fit_nig(&prior, &data.slice(0, t).unwrap(), alpha).unwrap();
        let next = data.slice(t, t + 1).unwrap();
        let v: Vec<f64> = oracle_draws(&post, 200_000, t as u64).iter().map(|(th, s)| oracle_risk(th, *s, &next)).collect();
        let (m, se) = mean_se(&v);
        total += m;
        var += se * se;
    }
    assert!((total - closed).abs() < 3.0 * var.sqrt(), "{total} vs {closed}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn a_shift_is_exact(k in 0u32..4000, seed in 0u64..100) {
        let alpha = k as f64 * 0.25;
        let data = toy_regression(10, 2, 1.0, seed);
        let prior = NigPrior::default_for(2);
        prop_assert_eq!(fit_nig(&prior, &data, alpha).unwrap().a - prior.a0, alpha / 2.0);
    }

    #[test]
    fn b_positive_on_generated_data(seed in 0u64..10_000, which in 0usize..3, ratio in 0.0f64..3.0) {
        let theta = [0.5, -1.0, 2.0];
        let n = 30;
        let (data, _) = match which {
            0 => gen_linreg(n, &theta, 1.0, seed).unwrap(),
            1 => gen_gmm_noise(n, &theta, 12.0, 0.1, 0.5, seed).unwrap(),
            _ => gen_uniform_noise(n, &theta, 4.5, seed).unwrap(),
        };
        let post = fit_nig(&NigPrior::default_for(3), &data, ratio * n as f64).unwrap();
        prop_assert!(post.b > 0.0);
        for t in peprl_terms_nig(&NigPrior::default_for(3), &data, ratio * n as f64, PeprlForm::Moment).unwrap() {
            prop_assert!(t.is_finite());
        }
    }
}
