//! Gaussian background model and its causal rank-one updates.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Default covariance ridge, relative to `trace / dim`.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Largest condition number (estimated from the Cholesky diagonal) accepted
/// for a covariance estimate.
const MAX_CONDITION: f64 = 1e13;

/// Background mean and inverse covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    pub mean: DVector<f64>,
    pub inv_cov: DMatrix<f64>,
}

impl BackgroundModel {
    pub fn new(mean: DVector<f64>, inv_cov: DMatrix<f64>) -> Result<Self> {
        if inv_cov.nrows() != mean.len() || inv_cov.ncols() != mean.len() {
            return Err(Error::invalid(format!(
                "inverse covariance is {}x{}, mean has {} entries",
                inv_cov.nrows(),
                inv_cov.ncols(),
                mean.len()
            )));
        }
        Ok(Self { mean, inv_cov })
    }

    /// Zero mean, identity inverse covariance.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: DVector::zeros(dim),
            inv_cov: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Builds the model from a covariance matrix, inverting it via Cholesky.
    pub fn from_covariance(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let inv_cov = invert_spd(cov)?;
        Self::new(mean, inv_cov)
    }
}

/// How the causal mean and inverse covariance updates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Exponential average `(1 - l) mu + l x` and the exact Sherman-Morrison
    /// inverse of `(1 - l) Sigma + l d d^T`.
    #[default]
    Consistent,
    /// The printed recurrences, evaluated term for term.
    Literal,
}

impl std::str::FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(UpdateMode::Consistent),
            "literal" => Ok(UpdateMode::Literal),
            other => Err(Error::invalid(format!("unknown update mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UpdateMode::Consistent => "consistent",
            UpdateMode::Literal => "literal",
        })
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverts a symmetric positive definite matrix, rejecting ill-conditioned input.
pub(crate) fn invert_spd(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Estimation("covariance is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    if !(lo > 0.0) || (hi / lo).powi(2) > MAX_CONDITION {
        return Err(Error::Estimation(format!(
            "covariance is numerically singular (condition estimate {:.3e}); raise the ridge",
            (hi / lo).powi(2)
        )));
    }
    let mut inv = chol.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!(
            "lambda must lie in (0, 1), got {lambda}"
        )));
    }
    Ok(())
}

/// Sample mean and covariance (denominator `n`) of `samples`, plus
/// `ridge * trace / dim` on the diagonal, stored as mean and inverse covariance.
pub fn estimate_background<V: AsRef<[f64]>>(samples: &[V], ridge: f64) -> Result<BackgroundModel> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::Estimation(format!(
            "need at least 2 samples, got {n}"
        )));
    }
    let dim = samples[0].as_ref().len();
    if dim == 0 || samples.iter().any(|s| s.as_ref().len() != dim) {
        return Err(Error::invalid("samples must share a non-zero dimension"));
    }
    if ridge == 0.0 && n <= dim {
        return Err(Error::Estimation(format!(
            "{n} samples cannot give a full-rank {dim}-dim covariance without a ridge"
        )));
    }

    let mut mean = DVector::<f64>::zeros(dim);
    for s in samples {
        mean += DVector::from_column_slice(s.as_ref());
    }
    mean /= n as f64;

    let mut centered = DMatrix::<f64>::zeros(dim, n);
    for (j, s) in samples.iter().enumerate() {
        for (i, v) in s.as_ref().iter().enumerate() {
            centered[(i, j)] = v - mean[i];
        }
    }
    let mut cov = &centered * centered.transpose() / n as f64;
    let load = ridge * cov.trace() / dim as f64;
    for i in 0..dim {
        cov[(i, i)] += load;
    }
    symmetrize(&mut cov);
    BackgroundModel::from_covariance(mean, cov)
}

/// One causal mean update.
///
/// `Consistent` gives `(1 - l) mu + l x`. `Literal` evaluates
/// `(1 - l) mu + l (x - mu)`, which equals `(1 - 2l) mu + l x`.
pub fn update_mean(
    mu: &DVector<f64>,
    x: &DVector<f64>,
    lambda: f64,
    mode: UpdateMode,
) -> DVector<f64> {
    match mode {
        UpdateMode::Consistent => mu * (1.0 - lambda) + x * lambda,
        UpdateMode::Literal => mu * (1.0 - lambda) + (x - mu) * lambda,
    }
}

/// One causal inverse-covariance update with `d = x - mean` (pre-update mean).
///
/// The returned model keeps the old mean; callers update it separately with
/// [`update_mean`].
pub fn update_inverse_covariance(
    bg: &BackgroundModel,
    x: &DVector<f64>,
    lambda: f64,
    mode: UpdateMode,
) -> Result<BackgroundModel> {
    check_lambda(lambda)?;
    if x.len() != bg.dim() {
        return Err(Error::invalid(format!(
            "sample has {} entries, model has {}",
            x.len(),
            bg.dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let d = x - &bg.mean;
    let keep = 1.0 - lambda;
    let mut next = match mode {
        UpdateMode::Consistent => {
            let v = &bg.inv_cov * &d;
            let denom = keep / lambda + d.dot(&v);
            (&bg.inv_cov - (&v * v.transpose()) / denom) / keep
        }
        UpdateMode::Literal => {
            let denom = keep / lambda + d.dot(&d);
            (&bg.inv_cov - (&d * d.transpose()) / denom) / keep
        }
    };
    symmetrize(&mut next);
    Ok(BackgroundModel {
        mean: bg.mean.clone(),
        inv_cov: next,
    })
}
