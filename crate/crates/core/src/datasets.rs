//! Seeded synthetic data with retained ground truth.
//!
//! Each row owns two seeds, one for its design entries and one for its noise
//! (or label), so rows are generated independently of each other.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{DataKind, Dataset};
use crate::error::{Error, Result};
use crate::random::{rng_from_seed, rng_stream};
use crate::special::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Gaussian { sigma2: f64 },
    /// `p·N(0, δ²) + (1 − p)·N(0, σ²)`.
    Gmm { sigma2: f64, delta2: f64, p: f64 },
    Uniform { half_width: f64 },
    None,
}

impl Noise {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Noise::Gaussian { sigma2 } => sigma2 >= 0.0 && sigma2.is_finite(),
            Noise::Gmm { sigma2, delta2, p } => {
                (0.0..=1.0).contains(&p) && delta2 >= 0.0 && delta2 <= sigma2 && sigma2.is_finite()
            }
            Noise::Uniform { half_width } => half_width > 0.0 && half_width.is_finite(),
            Noise::None => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid noise law {self:?}")))
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Noise::Gaussian { sigma2 } => sigma2,
            Noise::Gmm { sigma2, delta2, p } => p * delta2 + (1.0 - p) * sigma2,
            Noise::Uniform { half_width } => half_width * half_width / 3.0,
            Noise::None => 0.0,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Noise::Gaussian { sigma2 } => sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal),
            Noise::Gmm { sigma2, delta2, p } => {
                let small = rng.random::<f64>() < p;
                let z: f64 = rng.sample(StandardNormal);
                if small {
                    delta2.sqrt() * z
                } else {
                    sigma2.sqrt() * z
                }
            }
            Noise::Uniform { half_width } => rng.random_range(-half_width..=half_width),
            Noise::None => 0.0,
        }
    }
}

/// Built-in target functions for the polynomial setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrueFunction {
    /// `ζ² + 5`
    Parabola,
    /// `exp(ζ)`
    Exp,
}

impl TrueFunction {
    pub fn eval(&self, zeta: f64) -> f64 {
        match self {
            TrueFunction::Parabola => zeta * zeta + 5.0,
            TrueFunction::Exp => zeta.exp(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "parabola" | "zeta^2+5" => Ok(TrueFunction::Parabola),
            "exp" => Ok(TrueFunction::Exp),
            _ => Err(Error::InvalidInput(format!("unknown function `{s}`"))),
        }
    }
}

/// Law of one design row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    StandardNormal { d: usize },
    /// `(1, ζ, ..., ζ^{d−1})` with `ζ ~ U[−1, 1]`.
    Vandermonde { d: usize },
    Ones,
}

impl Design {
    pub fn dim(&self) -> usize {
        match *self {
            Design::StandardNormal { d } | Design::Vandermonde { d } => d,
            Design::Ones => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    /// Empty when the response is given by `function`.
    pub theta_star: Vec<f64>,
    pub noise: Noise,
    pub function: Option<TrueFunction>,
    pub design: Design,
    pub kind: DataKind,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        let d = self.design.dim();
        if d == 0 {
            return Err(Error::InvalidInput("design needs d >= 1".into()));
        }
        match self.function {
            Some(_) => {
                if !matches!(self.design, Design::Vandermonde { .. }) {
                    return Err(Error::InvalidInput("a target function needs a vandermonde design".into()));
                }
            }
            None => {
                if self.theta_star.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: self.theta_star.len() });
                }
            }
        }
        if self.kind == DataKind::Binary && (self.function.is_some() || self.noise != Noise::None) {
            return Err(Error::InvalidInput("binary ground truth takes no noise or function".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    pub fn theta(&self) -> Option<DVector<f64>> {
        if self.function.is_some() {
            None
        } else {
            Some(DVector::from_column_slice(&self.theta_star))
        }
    }

    /// Noise-free response (regression) or success probability (binary) at a row.
    fn signal(&self, z: &[f64], zeta: f64) -> f64 {
        let lin = || z.iter().zip(&self.theta_star).map(|(a, b)| a * b).sum::<f64>();
        match (self.kind, self.function) {
            (DataKind::Binary, _) => sigmoid(lin()),
            (DataKind::Regression, Some(f)) => f.eval(zeta),
            (DataKind::Regression, None) => lin(),
        }
    }

    fn design_row(&self, seed: u64) -> (Vec<f64>, f64) {
        let mut rng = rng_from_seed(seed);
        match self.design {
            Design::StandardNormal { d } => ((0..d).map(|_| rng.sample(StandardNormal)).collect(), 0.0),
            Design::Vandermonde { d } => {
                let zeta: f64 = rng.random_range(-1.0..=1.0);
                ((0..d).map(|k| zeta.powi(k as i32)).collect(), zeta)
            }
            Design::Ones => (vec![1.0], 0.0),
        }
    }

    /// One row per `(design_seed, noise_seed)` pair.
    pub fn sample_rows(&self, design_seeds: &[u64], noise_seeds: &[u64]) -> Result<Dataset> {
        self.validate()?;
        if design_seeds.len() != noise_seeds.len() {
            return Err(Error::DimensionMismatch { expected: design_seeds.len(), got: noise_seeds.len() });
        }
        let n = design_seeds.len();
        let d = self.dim();
        let mut z = DMatrix::zeros(n, d);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let (row, zeta) = self.design_row(design_seeds[i]);
            for (j, v) in row.iter().enumerate() {
                z[(i, j)] = *v;
            }
            let signal = self.signal(&row, zeta);
            let mut rng = rng_from_seed(noise_seeds[i]);
            y[i] = match self.kind {
                DataKind::Binary => f64::from(u8::from(rng.random::<f64>() < signal)),
                DataKind::Regression => signal + self.noise.sample(&mut rng),
            };
        }
        Dataset::new(z, y, self.kind)
    }

    /// `n` rows with per-row seeds derived from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_with_design(n, seed, seed)
    }

    /// As [`Self::sample`] but with the design drawn from `design_seed`, so the
    /// design can be held fixed while the noise varies.
    pub fn sample_with_design(&self, n: usize, design_seed: u64, noise_seed: u64) -> Result<Dataset> {
        let (ds, ns) = row_seeds(n, design_seed, noise_seed);
        self.sample_rows(&ds, &ns)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-row design and noise seeds.
pub fn row_seeds(n: usize, design_seed: u64, noise_seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rd = rng_stream(design_seed, 0);
    let mut rn = rng_stream(noise_seed, 1);
    ((0..n).map(|_| rd.random()).collect(), (0..n).map(|_| rn.random()).collect())
}

/// `θ* ~ N(0, I_d)` from a seed.
pub fn draw_theta_star(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_stream(seed, 2);
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn build(truth: GroundTruth, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if n == 0 {
        return Err(Error::InvalidInput("generators need n >= 1".into()));
    }
    let data = truth.sample(n, seed)?;
    Ok((data, truth))
}

/// `Y = Zθ* + N(0, σ²)` with standard-normal design.
pub fn gen_linreg(n: usize, theta_star: &[f64], sigma2: f64, seed: u64) -> Result<(Dataset, GroundTruth)> {
    build(
        GroundTruth {
            theta_star: theta_star.to_vec(),
            noise: Noise::Gaussian { sigma2 },
            function: None,
            design: Design::StandardNormal { d: theta_star.len() },
            kind: DataKind::Regression,
        },
        n,
        seed,
    )
}

/// `X_i ~ N(θ, 1)` encoded with an all-ones design.
pub fn gen_gaussian_mean(n: usize, theta: f64, seed: u64) -> Result<(Dataset, GroundTruth)> {
    build(
        GroundTruth {
            theta_star: vec![theta],
            noise: Noise::Gaussian { sigma2: 1.0 },
            function: None,
            design: Design::Ones,
            kind: DataKind::Regression,
        },
        n,
        seed,
    )
}

/// `Y = f(ζ) + N(0, σ²)` with `ζ ~ U[−1, 1]` and a Vandermonde design.
pub fn gen_polynomial(
    n: usize,
    d: usize,
    f: TrueFunction,
    sigma2_true: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruth)> {
    build(
        GroundTruth {
            theta_star: Vec::new(),
            noise: Noise::Gaussian { sigma2: sigma2_true },
            function: Some(f),
            design: Design::Vandermonde { d },
            kind: DataKind::Regression,
        },
        n,
        seed,
    )
}

pub fn gen_gmm_noise(
    n: usize,
    theta_star: &[f64],
    sigma2: f64,
    delta2: f64,
    p: f64,
    seed: u64,
) -> Result<(Dataset, GroundTruth)> {
    build(
        GroundTruth {
            theta_star: theta_star.to_vec(),
            noise: Noise::Gmm { sigma2, delta2, p },
            function: None,
            design: Design::StandardNormal { d: theta_star.len() },
            kind: DataKind::Regression,
        },
        n,
        seed,
    )
}

pub fn gen_uniform_noise(n: usize, theta_star: &[f64], half_width: f64, seed: u64) -> Result<(Dataset, GroundTruth)> {
    build(
        GroundTruth {
            theta_star: theta_star.to_vec(),
            noise: Noise::Uniform { half_width },
            function: None,
            design: Design::StandardNormal { d: theta_star.len() },
            kind: DataKind::Regression,
        },
        n,
        seed,
    )
}

/// `P(Y = 1 | Z) = σ(θ*ᵀZ)` with standard-normal design.
pub fn gen_logistic(n: usize, theta_star: &[f64], seed: u64) -> Result<(Dataset, GroundTruth)> {
    build(
        GroundTruth {
            theta_star: theta_star.to_vec(),
            noise: Noise::None,
            function: None,
            design: Design::StandardNormal { d: theta_star.len() },
            kind: DataKind::Binary,
        },
        n,
        seed,
    )
}

/// Named synthetic settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Linreg,
    GaussianMean,
    Polynomial,
    Gmm,
    Uniform,
    Logistic,
}

impl Setting {
    pub const ALL: [Setting; 6] =
        [Setting::Linreg, Setting::GaussianMean, Setting::Polynomial, Setting::Gmm, Setting::Uniform, Setting::Logistic];

    pub fn name(&self) -> &'static str {
        match self {
            Setting::Linreg => "linreg",
            Setting::GaussianMean => "gaussian_mean",
            Setting::Polynomial => "polynomial",
            Setting::Gmm => "gmm",
            Setting::Uniform => "uniform",
            Setting::Logistic => "logistic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown setting `{s}`")))
    }
}

/// Generator parameters for one setting; unused fields are ignored by that setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub setting: Setting,
    pub n: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    /// True noise variance (σ² of the Gaussian or of the wide GMM component).
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default)]
    pub delta2: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_function")]
    pub function: TrueFunction,
    /// Keep the design matrix fixed across repetitions.
    #[serde(default)]
    pub freeze_design: bool,
}

fn default_d() -> usize {
    1
}
fn default_sigma2() -> f64 {
    1.0
}
fn default_p() -> f64 {
    0.5
}
fn default_half_width() -> f64 {
    1.0
}
fn default_function() -> TrueFunction {
    TrueFunction::Parabola
}

impl DatasetSpec {
    pub fn new(setting: Setting, n: usize, d: usize) -> Self {
        Self {
            setting,
            n,
            d,
            sigma2: default_sigma2(),
            delta2: 0.0,
            p: default_p(),
            half_width: default_half_width(),
            function: default_function(),
            freeze_design: false,
        }
    }

    pub fn data_kind(&self) -> DataKind {
        if self.setting == Setting::Logistic {
            DataKind::Binary
        } else {
            DataKind::Regression
        }
    }

    /// Column count of the generated design.
    pub fn dim(&self) -> usize {
        if self.setting == Setting::GaussianMean {
            1
        } else {
            self.d
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dim() == 0 {
            return Err(Error::InvalidInput("dataset needs n >= 1 and d >= 1".into()));
        }
        Ok(())
    }

    /// Ground truth with `θ*` drawn from `seed`.
    pub fn truth(&self, seed: u64) -> Result<GroundTruth> {
        self.validate()?;
        let theta = draw_theta_star(self.dim(), seed);
        let (noise, function, design, kind) = match self.setting {
            Setting::Linreg => (
                Noise::Gaussian { sigma2: self.sigma2 },
                None,
                Design::StandardNormal { d: self.d },
                DataKind::Regression,
            ),
            Setting::GaussianMean => {
                (Noise::Gaussian { sigma2: self.sigma2 }, None, Design::Ones, DataKind::Regression)
            }
            Setting::Polynomial => (
                Noise::Gaussian { sigma2: self.sigma2 },
                Some(self.function),
                Design::Vandermonde { d: self.d },
                DataKind::Regression,
            ),
            Setting::Gmm => (
                Noise::Gmm { sigma2: self.sigma2, delta2: self.delta2, p: self.p },
                None,
                Design::StandardNormal { d: self.d },
                DataKind::Regression,
            ),
            Setting::Uniform => (
                Noise::Uniform { half_width: self.half_width },
                None,
                Design::StandardNormal { d: self.d },
                DataKind::Regression,
            ),
            Setting::Logistic => (Noise::None, None, Design::StandardNormal { d: self.d }, DataKind::Binary),
        };
        let theta_star = if function.is_some() { Vec::new() } else { theta };
        let truth = GroundTruth { theta_star, noise, function, design, kind };
        truth.validate()?;
        Ok(truth)
    }

    /// Draws the ground truth and `n` rows from `seed`.
    pub fn generate(&self, seed: u64) -> Result<(Dataset, GroundTruth)> {
        let truth = self.truth(seed)?;
        let data = truth.sample(self.n, seed)?;
        Ok((data, truth))
    }
}

/// Empirical mean and variance helper used by moment checks.
pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}
