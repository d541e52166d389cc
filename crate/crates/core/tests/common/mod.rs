#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use tempcal::random::rng_from_seed;
use tempcal::Dataset;

/// Standard-normal design and `y = Zθ + N(0, σ²)`.
pub fn toy_regression(n: usize, d: usize, sigma2: f64, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let theta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let z = DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        let mean: f64 = (0..d).map(|j| z[(i, j)] * theta[j]).sum();
        mean + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
    });
    Dataset::regression(z, y).unwrap()
}

pub fn toy_binary(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let theta: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let z = DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        let u: f64 = (0..d).map(|j| z[(i, j)] * theta[j]).sum();
        let p = 1.0 / (1.0 + (-u).exp());
        if rng.random::<f64>() < p { 1.0 } else { 0.0 }
    });
    Dataset::binary(z, y).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
