//! Empirical risks and Monte-Carlo estimators over posterior draws.

use nalgebra::DVector;
use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Mean of `loss(θ, z_i, y_i)` over the rows of `data`.
pub fn empirical_risk<P, L>(loss: L, theta: &P, data: &Dataset) -> Result<f64>
where
    L: Fn(&P, &DVector<f64>, f64) -> f64,
{
    let mut sum = 0.0;
    for i in 0..data.n() {
        let l = loss(theta, &data.row(i), data.y()[i]);
        if !l.is_finite() {
            return Err(Error::NonFinite { index: i, value: l });
        }
        sum += l;
    }
    Ok(sum / data.n() as f64)
}

/// Gaussian negative log-likelihood with the `log 2πσ²` constant dropped.
pub fn squared_loss(theta: &DVector<f64>, z: &DVector<f64>, y: f64, sigma2: f64) -> f64 {
    let r = y - z.dot(theta);
    r * r / (2.0 * sigma2)
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// Negated sample covariance between `r_test` and `r_train` under `mc` draws.
///
/// For an exact α-posterior this estimates `∂/∂α E[r_test]`. The standard
/// error is that of the mean of the centered products.
pub fn covariance_gradient_mc<P, R, S, A, B>(
    mut sample: S,
    r_train: A,
    r_test: B,
    mc: usize,
    rng: &mut R,
) -> Result<McEstimate>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> P,
    A: Fn(&P) -> f64,
    B: Fn(&P) -> f64,
{
    if mc < 2 {
        return Err(Error::InvalidInput(format!("covariance gradient needs mc >= 2, got {mc}")));
    }
    let mut train = Vec::with_capacity(mc);
    let mut test = Vec::with_capacity(mc);
    for i in 0..mc {
        let theta = sample(rng);
        let a = r_train(&theta);
        let b = r_test(&theta);
        if !a.is_finite() {
            return Err(Error::NonFinite { index: i, value: a });
        }
        if !b.is_finite() {
            return Err(Error::NonFinite { index: i, value: b });
        }
        train.push(a);
        test.push(b);
    }
    Ok(neg_covariance(&train, &test))
}

/// `−mean((a − ā)(b − b̄))` and its standard error.
pub fn neg_covariance(a: &[f64], b: &[f64]) -> McEstimate {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let prods: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let (mean, se) = mean_and_se(&prods);
    McEstimate { value: -mean, std_error: se }
}

/// Average of `risk` over `mc` posterior draws.
pub fn mc_risk<P, R, S, F>(mut sample: S, risk: F, mc: usize, rng: &mut R) -> Result<McEstimate>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> P,
    F: Fn(&P) -> f64,
{
    if mc < 1 {
        return Err(Error::InvalidInput("mc_risk needs mc >= 1".into()));
    }
    let mut vals = Vec::with_capacity(mc);
    for i in 0..mc {
        let v = risk(&sample(rng));
        if !v.is_finite() {
            return Err(Error::NonFinite { index: i, value: v });
        }
        vals.push(v);
    }
    let (value, std_error) = mean_and_se(&vals);
    Ok(McEstimate { value, std_error })
}

pub(crate) fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn squared_loss_single_point() {
        let data = Dataset::regression(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 2.0))
            .unwrap();
        let theta = DVector::zeros(1);
        let r = empirical_risk(|t, z, y| squared_loss(t, z, y, 1.0), &theta, &data).unwrap();
        assert_eq!(r, 2.0);
    }

    #[test]
    fn non_finite_loss_reports_index() {
        let data = Dataset::regression(DMatrix::from_element(3, 1, 1.0), DVector::zeros(3)).unwrap();
        let err = empirical_risk(
            |_: &f64, _, y| if y == 0.0 { f64::NAN } else { 0.0 },
            &0.0,
            &data.slice(1, 3).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn covariance_with_constant_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = covariance_gradient_mc(
            |r: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(r) },
            |x| x * x,
            |_| 4.0,
            100,
            &mut rng,
        )
        .unwrap();
        assert_eq!(g.value, 0.0);
    }

    #[test]
    fn identical_risks_give_non_positive_gradient() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = covariance_gradient_mc(
                |r: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(r) },
                |x| (x - 0.3).powi(2),
                |x| (x - 0.3).powi(2),
                2,
                &mut rng,
            )
            .unwrap();
            assert!(g.value <= 0.0);
        }
    }

    #[test]
    fn mc_below_two_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(covariance_gradient_mc(|_: &mut ChaCha8Rng| 0.0, |x| *x, |x| *x, 1, &mut rng).is_err());
    }

    #[test]
    fn delta_sampler_mc_risk_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = mc_risk(|_: &mut ChaCha8Rng| 1.5, |x| x * 2.0, 10, &mut rng).unwrap();
        assert_eq!(e.value, 3.0);
        assert_eq!(e.std_error, 0.0);
    }
}
