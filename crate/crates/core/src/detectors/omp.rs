//! Orthogonal matching pursuit and its two-sample joint variant.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::ConfidenceTrace;
use crate::dsrf::Dictionary;
use crate::preprocessing::FeatureVector;
use crate::{Error, Result};

/// Default down-track half spacing, in samples, between the two joint samples.
pub const DEFAULT_JOMP_OFFSET: usize = 5;
/// Default number of atoms per reconstruction.
pub const DEFAULT_SPARSITY: usize = 1;

/// Sparse reconstruction of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpResult {
    pub selected_atoms: Vec<usize>,
    pub weights: Vec<f64>,
    /// `||y - D_S w||^2`.
    pub residual_sq: f64,
    /// Set when the input had no energy; nothing was selected.
    pub degenerate: bool,
}

fn least_squares(atoms: &[&[f64]], selected: &[usize], y: &[f64]) -> Vec<f64> {
    if let [only] = selected {
        let a = atoms[*only];
        let aa: f64 = a.iter().map(|v| v * v).sum();
        let ay: f64 = a.iter().zip(y).map(|(p, q)| p * q).sum();
        return vec![ay / aa];
    }
    let cols: Vec<DVector<f64>> = selected
        .iter()
        .map(|&i| DVector::from_column_slice(atoms[i]))
        .collect();
    let a = DMatrix::from_columns(&cols);
    let rhs = DVector::from_column_slice(y);
    a.svd(true, true)
        .solve(&rhs, 1e-12)
        .expect("SVD was computed with both factors")
        .iter()
        .copied()
        .collect()
}

fn residual(atoms: &[&[f64]], selected: &[usize], weights: &[f64], y: &[f64]) -> Vec<f64> {
    let mut r = y.to_vec();
    for (&i, w) in selected.iter().zip(weights) {
        for (ri, a) in r.iter_mut().zip(atoms[i]) {
            *ri -= w * a;
        }
    }
    r
}

/// OMP over several samples that share one atom set.
///
/// Each step picks the unused atom with the largest summed squared
/// correlation with the current residuals, then refits every sample by least
/// squares on the shared set. With one sample this is plain OMP.
pub fn joint_omp<V: AsRef<[f64]>, A: AsRef<[f64]>>(
    samples: &[V],
    atoms: &[A],
    sparsity: usize,
) -> Result<Vec<OmpResult>> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if sparsity == 0 || sparsity > atoms.len() {
        return Err(Error::invalid(format!(
            "sparsity {sparsity} must lie in 1..={}",
            atoms.len()
        )));
    }
    let dim = samples[0].as_ref().len();
    if samples.iter().any(|s| s.as_ref().len() != dim)
        || atoms.iter().any(|a| a.as_ref().len() != dim)
    {
        return Err(Error::invalid("samples and atoms must share one dimension"));
    }
    let atoms: Vec<&[f64]> = atoms.iter().map(AsRef::as_ref).collect();
    let ys: Vec<&[f64]> = samples.iter().map(AsRef::as_ref).collect();
    let energy: f64 = ys.iter().flat_map(|y| y.iter()).map(|v| v * v).sum();
    if energy == 0.0 {
        return Ok(ys
            .iter()
            .map(|_| OmpResult {
                selected_atoms: Vec::new(),
                weights: Vec::new(),
                residual_sq: 0.0,
                degenerate: true,
            })
            .collect());
    }

    let mut selected: Vec<usize> = Vec::with_capacity(sparsity);
    let mut weights: Vec<Vec<f64>> = vec![Vec::new(); ys.len()];
    let mut residuals: Vec<Vec<f64>> = ys.iter().map(|y| y.to_vec()).collect();
    for _ in 0..sparsity {
        let mut best: Option<(usize, f64)> = None;
        for (i, a) in atoms.iter().enumerate() {
            if selected.contains(&i) {
                continue;
            }
            let score: f64 = residuals
                .iter()
                .map(|r| {
                    let c: f64 = a.iter().zip(r).map(|(p, q)| p * q).sum();
                    c * c
                })
                .sum();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        match best {
            Some((i, score)) if score > 1e-28 * energy => selected.push(i),
            _ => break,
        }
        for (j, y) in ys.iter().enumerate() {
            weights[j] = least_squares(&atoms, &selected, y);
            residuals[j] = residual(&atoms, &selected, &weights[j], y);
        }
    }

    Ok(residuals
        .into_iter()
        .zip(weights)
        .map(|(r, w)| OmpResult {
            selected_atoms: selected.clone(),
            weights: w,
            residual_sq: r.iter().map(|v| v * v).sum(),
            degenerate: false,
        })
        .collect())
}

/// Greedy OMP of one sample over `atoms`.
pub fn omp<A: AsRef<[f64]>>(x: &[f64], atoms: &[A], sparsity: usize) -> Result<OmpResult> {
    Ok(joint_omp(&[x], atoms, sparsity)?.remove(0))
}

/// `1 / (1 + mean(residuals))`.
pub fn jomp_confidence(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::invalid("no residuals"));
    }
    if let Some(r) = residuals.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::invalid(format!("residual must be >= 0, got {r}")));
    }
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Ok(1.0 / (1.0 + mean))
}

/// JOMP confidence at sample `i` from the joint reconstruction of samples
/// `i - offset` and `i + offset`; samples within `offset` of either end get 0.
pub fn detect_jomp(
    features: &[FeatureVector],
    dict: &Dictionary,
    offset: usize,
    sparsity: usize,
) -> Result<ConfidenceTrace> {
    if offset == 0 {
        return Err(Error::invalid("JOMP offset must be positive"));
    }
    let n = features.len();
    if n <= 2 * offset {
        return Err(Error::invalid(format!(
            "lane has {n} samples, needs more than {} for offset {offset}",
            2 * offset
        )));
    }
    let atoms: Vec<&FeatureVector> = dict.features().collect();
    let confidences = (0..n)
        .into_par_iter()
        .map(|i| {
            if i < offset || i + offset >= n {
                return Ok(0.0);
            }
            let pair = [&features[i - offset], &features[i + offset]];
            let fits = joint_omp(&pair, &atoms, sparsity)?;
            let residuals: Vec<f64> = fits.iter().map(|f| f.residual_sq).collect();
            jomp_confidence(&residuals)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConfidenceTrace::new("jomp", confidences))
}
