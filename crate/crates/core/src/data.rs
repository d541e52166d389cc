use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Regression,
    Binary,
}

/// Paired design matrix `z` (n×d) and responses `y` (n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    z: DMatrix<f64>,
    y: DVector<f64>,
    kind: DataKind,
}

impl Dataset {
    pub fn new(z: DMatrix<f64>, y: DVector<f64>, kind: DataKind) -> Result<Self> {
        if z.nrows() == 0 || z.ncols() == 0 {
            return Err(Error::InvalidInput("dataset needs n >= 1 and d >= 1".into()));
        }
        if y.len() != z.nrows() {
            return Err(Error::DimensionMismatch { expected: z.nrows(), got: y.len() });
        }
        if let Some(i) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i % z.nrows(), value: z[i] });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, value: y[i] });
        }
        if kind == DataKind::Binary {
            if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidInput(format!(
                    "binary dataset has label {} at row {i}",
                    y[i]
                )));
            }
        }
        Ok(Self { z, y, kind })
    }

    pub fn regression(z: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(z, y, DataKind::Regression)
    }

    pub fn binary(z: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(z, y, DataKind::Binary)
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn kind(&self) -> DataKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn d(&self) -> usize {
        self.z.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.z.row(i).transpose()
    }

    /// New dataset made of the given rows (repetitions allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::InvalidInput("row selection is empty".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n()) {
            return Err(Error::InvalidInput(format!("row {bad} out of range (n = {})", self.n())));
        }
        let z = self.z.select_rows(idx);
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        Ok(Self { z, y, kind: self.kind })
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return Err(Error::InvalidInput(format!(
                "invalid row range {start}..{end} for n = {}",
                self.n()
            )));
        }
        Ok(Self {
            z: self.z.rows(start, end - start).into_owned(),
            y: self.y.rows(start, end - start).into_owned(),
            kind: self.kind,
        })
    }

    /// Splits into the first ⌈n/2⌉ rows and the rest.
    pub fn split_halves(&self) -> Result<(Self, Self)> {
        let n = self.n();
        if n < 2 {
            return Err(Error::InvalidInput("sample splitting needs n >= 2".into()));
        }
        let k = n.div_ceil(2);
        Ok((self.slice(0, k)?, self.slice(k, n)?))
    }

    pub fn stats(&self) -> SufficientStats {
        SufficientStats::from_data(&self.z, &self.y)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.d()).map(|j| format!("z_{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.z.row(i).iter().map(|v| format_f64(*v)).collect();
            rec.push(format_f64(self.y[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV with header `z_0..z_{d-1},y`. The kind is inferred: binary
    /// when every label is 0 or 1, regression otherwise.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let ncol = header.len();
        if ncol < 2 || &header[ncol - 1] != "y" {
            return Err(Error::InvalidInput("csv header must be z_0..z_{d-1},y".into()));
        }
        for (j, h) in header.iter().take(ncol - 1).enumerate() {
            if h != format!("z_{j}") {
                return Err(Error::InvalidInput(format!("unexpected column `{h}` at position {j}")));
            }
        }
        let d = ncol - 1;
        let mut zs = Vec::new();
        let mut ys = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for j in 0..d {
                zs.push(parse_f64(&rec[j])?);
            }
            ys.push(parse_f64(&rec[d])?);
        }
        let n = ys.len();
        if n == 0 {
            return Err(Error::InvalidInput("csv has no rows".into()));
        }
        let z = DMatrix::from_row_slice(n, d, &zs);
        let y = DVector::from_vec(ys);
        let kind = if y.iter().all(|&v| v == 0.0 || v == 1.0) {
            DataKind::Binary
        } else {
            DataKind::Regression
        };
        Self::new(z, y, kind)
    }

    pub fn with_kind(mut self, kind: DataKind) -> Result<Self> {
        self.kind = kind;
        Self::new(self.z, self.y, self.kind)
    }
}

fn format_f64(v: f64) -> String {
    // `{:?}` prints the shortest representation that round-trips.
    format!("{v:?}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidInput(format!("cannot parse `{s}` as a number")))
}

/// Quadratic sufficient statistics of a regression dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub ztz: DMatrix<f64>,
    pub zty: DVector<f64>,
    pub yty: f64,
    pub n: usize,
}

impl SufficientStats {
    pub fn from_data(z: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self { ztz: z.tr_mul(z), zty: z.tr_mul(y), yty: y.dot(y), n: z.nrows() }
    }

    pub fn d(&self) -> usize {
        self.zty.len()
    }

    /// `‖y − Zθ‖²` from the statistics alone.
    pub fn rss(&self, theta: &DVector<f64>) -> f64 {
        (self.yty - 2.0 * self.zty.dot(theta) + theta.dot(&(&self.ztz * theta))).max(0.0)
    }
}
