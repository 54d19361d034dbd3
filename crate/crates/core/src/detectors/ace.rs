//! Adaptive Coherence Estimator with a global or causally updated background.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::background::{
    estimate_background, update_inverse_covariance, update_mean, BackgroundModel, UpdateMode,
    DEFAULT_RIDGE,
};
use super::ConfidenceTrace;
use crate::dsrf::Dictionary;
use crate::preprocessing::FeatureVector;
use crate::{Error, Result};

/// Vectors closer than this to the background mean have no direction.
const MIN_OFFSET_NORM: f64 = 1e-12;

/// Squared cosine of the angle between `x - mu` and `t - mu` in the inner
/// product defined by the inverse background covariance.
pub fn ace_statistic(x: &[f64], t: &[f64], bg: &BackgroundModel) -> Result<f64> {
    let dim = bg.dim();
    if x.len() != dim || t.len() != dim {
        return Err(Error::invalid(format!(
            "vectors of length {} and {} against a {dim}-dim model",
            x.len(),
            t.len()
        )));
    }
    let dx = DVector::from_column_slice(x) - &bg.mean;
    let dt = DVector::from_column_slice(t) - &bg.mean;
    if dx.norm() < MIN_OFFSET_NORM {
        return Err(Error::UndefinedStatistic(
            "sample coincides with the background mean",
        ));
    }
    if dt.norm() < MIN_OFFSET_NORM {
        return Err(Error::UndefinedStatistic(
            "target coincides with the background mean",
        ));
    }
    let wx = &bg.inv_cov * &dx;
    let xx = dx.dot(&wx);
    let tx = dt.dot(&wx);
    let tt = dt.dot(&(&bg.inv_cov * &dt));
    if !(xx > 0.0 && tt > 0.0) {
        return Err(Error::UndefinedStatistic("non-positive Mahalanobis norm"));
    }
    Ok((tx * tx / (tt * xx)).clamp(0.0, 1.0))
}

/// ACE against every atom of a dictionary for a fixed background.
///
/// Target-side terms are computed once, so scoring a sample costs one
/// `dim x dim` and one `dim x atoms` product.
#[derive(Debug, Clone)]
pub struct AceScorer {
    mean: DVector<f64>,
    inv_cov: DMatrix<f64>,
    /// Columns `inv_cov (t_a - mean)` for the usable atoms.
    whitened_targets: DMatrix<f64>,
    /// `(t_a - mean)^T inv_cov (t_a - mean)` for the usable atoms.
    target_norms: DVector<f64>,
}

impl AceScorer {
    pub fn new<V: AsRef<[f64]>>(bg: &BackgroundModel, targets: &[V]) -> Result<Self> {
        let dim = bg.dim();
        let mut cols = Vec::with_capacity(targets.len());
        for t in targets {
            let t = t.as_ref();
            if t.len() != dim {
                return Err(Error::invalid(format!(
                    "target of length {} against a {dim}-dim model",
                    t.len()
                )));
            }
            let dt = DVector::from_column_slice(t) - &bg.mean;
            if dt.norm() < MIN_OFFSET_NORM {
                log::debug!("skipping target that coincides with the background mean");
                continue;
            }
            cols.push(dt);
        }
        let offsets = if cols.is_empty() {
            DMatrix::zeros(dim, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let whitened = &bg.inv_cov * &offsets;
        let norms = DVector::from_iterator(
            offsets.ncols(),
            offsets
                .column_iter()
                .zip(whitened.column_iter())
                .map(|(a, b)| a.dot(&b)),
        );
        // Drop atoms with a non-positive quadratic form (possible under literal updates).
        let keep: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] > 0.0).collect();
        let whitened_targets = whitened.select_columns(&keep);
        let target_norms = norms.select_rows(&keep);
        Ok(Self {
            mean: bg.mean.clone(),
            inv_cov: bg.inv_cov.clone(),
            whitened_targets,
            target_norms,
        })
    }

    pub fn usable_targets(&self) -> usize {
        self.target_norms.len()
    }

    /// Maximum ACE over all usable targets; 0 when the statistic is undefined.
    pub fn score(&self, x: &[f64]) -> f64 {
        let dx = DVector::from_column_slice(x) - &self.mean;
        if dx.norm() < MIN_OFFSET_NORM {
            log::warn!("sample coincides with the background mean; confidence set to 0");
            return 0.0;
        }
        let xx = dx.dot(&(&self.inv_cov * &dx));
        if !(xx > 0.0) || self.target_norms.is_empty() {
            log::warn!("ACE undefined for every target; confidence set to 0");
            return 0.0;
        }
        let cross = self.whitened_targets.tr_mul(&dx);
        cross
            .iter()
            .zip(self.target_norms.iter())
            .map(|(c, tt)| (c * c / (tt * xx)).clamp(0.0, 1.0))
            .fold(0.0, f64::max)
    }
}

/// Maximum ACE of `x` over the dictionary atoms.
pub fn ace_confidence(x: &[f64], dict: &Dictionary, bg: &BackgroundModel) -> Result<f64> {
    if dict.is_empty() {
        return Err(Error::invalid("empty dictionary"));
    }
    let atoms: Vec<&FeatureVector> = dict.features().collect();
    Ok(AceScorer::new(bg, &atoms)?.score(x))
}

/// ACE confidence of every sample against one background estimated from all samples.
pub fn detect_global_ace(
    features: &[FeatureVector],
    dict: &Dictionary,
    ridge: f64,
) -> Result<ConfidenceTrace> {
    if dict.is_empty() {
        return Err(Error::invalid("empty dictionary"));
    }
    let bg = estimate_background(features, ridge)?;
    let atoms: Vec<&FeatureVector> = dict.features().collect();
    let scorer = AceScorer::new(&bg, &atoms)?;
    let confidences = features.par_iter().map(|x| scorer.score(x)).collect();
    Ok(ConfidenceTrace::new("ace-global", confidences))
}

/// Parameters of the causally updated detector.
#[derive(Debug, Clone, PartialEq)]
pub struct WaceConfig {
    /// Weight of each new background sample.
    pub lambda: f64,
    /// Samples used for the initial estimate; also the update lag.
    pub init_window: usize,
    /// A lagged sample joins the background when its confidence is below this.
    pub background_threshold: f64,
    pub update_mode: UpdateMode,
    /// Ridge for the initial estimate.
    pub ridge: f64,
}

impl Default for WaceConfig {
    fn default() -> Self {
        Self {
            lambda: 0.005,
            init_window: 200,
            background_threshold: 0.5,
            update_mode: UpdateMode::Consistent,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl WaceConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::invalid(format!(
                "lambda must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if self.init_window <= dim {
            return Err(Error::invalid(format!(
                "init window {} must exceed the feature dimension {dim}",
                self.init_window
            )));
        }
        if !(0.0..=1.0).contains(&self.background_threshold) {
            return Err(Error::invalid(format!(
                "background threshold must lie in [0, 1], got {}",
                self.background_threshold
            )));
        }
        Ok(())
    }
}

/// Causal ACE: the background is initialized from the first `N` samples and
/// afterwards absorbs sample `k - N` before sample `k` is scored, provided its
/// own confidence fell below the background threshold.
pub fn detect_wace(
    features: &[FeatureVector],
    dict: &Dictionary,
    cfg: &WaceConfig,
) -> Result<ConfidenceTrace> {
    if dict.is_empty() {
        return Err(Error::invalid("empty dictionary"));
    }
    let dim = features.first().map_or(0, |f| f.len());
    cfg.validate(dim)?;
    let lag = cfg.init_window;
    if features.len() < 2 * lag {
        return Err(Error::invalid(format!(
            "lane has {} samples, needs at least {} for an init window of {lag}",
            features.len(),
            2 * lag
        )));
    }
    let atoms: Vec<&FeatureVector> = dict.features().collect();
    let mut bg = estimate_background(&features[..lag], cfg.ridge)?;
    let mut scorer = AceScorer::new(&bg, &atoms)?;

    let mut confidences: Vec<f64> = features[..2 * lag]
        .iter()
        .map(|x| scorer.score(x))
        .collect();
    for k in 2 * lag..features.len() {
        let lagged = k - lag;
        if confidences[lagged] < cfg.background_threshold {
            let x = DVector::from_column_slice(&features[lagged]);
            let mut next = update_inverse_covariance(&bg, &x, cfg.lambda, cfg.update_mode)?;
            next.mean = update_mean(&bg.mean, &x, cfg.lambda, cfg.update_mode);
            bg = next;
            scorer = AceScorer::new(&bg, &atoms)?;
        }
        confidences.push(scorer.score(&features[k]));
    }
    Ok(ConfidenceTrace::new("wace", confidences))
}
