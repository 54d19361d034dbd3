//! Down-track filtering and feature normalization.
//!
//! Raw sweeps are filtered along the acquisition order with a zero-mean
//! sine kernel, then each sweep becomes a 42-dim real vector (real parts,
//! then imaginary parts) with the mean of the real block removed and unit
//! L2 norm. Dictionary atoms go through the same normalization.

use std::ops::Deref;

use num_complex::Complex64;

use crate::dsrf::Dictionary;
use crate::{Error, Position, Result};

/// Default down-track filter width in samples.
pub const DEFAULT_FILTER_WIDTH: usize = 9;

/// One sensor reading.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSample {
    pub easting: f64,
    pub northing: f64,
    pub response: Vec<Complex64>,
}

impl SweepSample {
    pub fn position(&self) -> Position {
        Position::new(self.easting, self.northing)
    }
}

/// Samples of one lane in down-track acquisition order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawLane {
    pub lane_id: String,
    pub samples: Vec<SweepSample>,
    pub operating_freqs: Vec<f64>,
}

impl RawLane {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<Position> {
        self.samples.iter().map(SweepSample::position).collect()
    }

    /// Checks that every sample has one response per operating frequency and
    /// a finite position.
    pub fn validate(&self) -> Result<()> {
        let n = self.operating_freqs.len();
        for (i, s) in self.samples.iter().enumerate() {
            if s.response.len() != n {
                return Err(Error::invalid(format!(
                    "sample {i} has {} responses, expected {n}",
                    s.response.len()
                )));
            }
            if !(s.easting.is_finite() && s.northing.is_finite()) {
                return Err(Error::invalid(format!(
                    "sample {i} has a non-finite position"
                )));
            }
        }
        Ok(())
    }
}

/// Zero-real-mean, unit-norm feature vector: real parts followed by imaginary parts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Zero-mean, unit-norm sine kernel of odd `width`.
///
/// The kernel is one positive half period of a sine sampled at
/// `n + 1` for `n = 0..width`, with the mean removed: a positive center lobe
/// flanked by negative side lobes. It is symmetric, rejects constants, and
/// peaks over the center of a unimodal down-track pulse.
pub fn sine_filter_taps(width: usize) -> Result<Vec<f64>> {
    if width < 3 || width % 2 == 0 {
        return Err(Error::invalid(format!(
            "filter width must be odd and >= 3, got {width}"
        )));
    }
    let step = std::f64::consts::PI / (width + 1) as f64;
    let mut taps: Vec<f64> = (0..width).map(|n| (step * (n + 1) as f64).sin()).collect();
    let mean = taps.iter().sum::<f64>() / width as f64;
    taps.iter_mut().for_each(|t| *t -= mean);
    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);
    // Re-center after scaling so the sum cancels to rounding.
    let residual = taps.iter().sum::<f64>() / width as f64;
    taps.iter_mut().for_each(|t| *t -= residual);
    Ok(taps)
}

/// "Same"-aligned, zero-padded convolution of one channel.
fn convolve_same(input: &[f64], taps: &[f64], out: &mut [f64]) {
    let half = (taps.len() / 2) as isize;
    let n = input.len() as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &h) in taps.iter().enumerate() {
            let j = i as isize + half - k as isize;
            if (0..n).contains(&j) {
                acc += h * input[j as usize];
            }
        }
        *o = acc;
    }
}

/// Convolves every real and imaginary channel along the sample index.
pub fn downtrack_filter(lane: &RawLane, taps: &[f64]) -> Result<RawLane> {
    if taps.is_empty() || taps.len() % 2 == 0 {
        return Err(Error::invalid("filter must have an odd number of taps"));
    }
    if lane.len() < taps.len() {
        return Err(Error::invalid(format!(
            "lane has {} samples, shorter than the {}-tap filter",
            lane.len(),
            taps.len()
        )));
    }
    lane.validate()?;
    let n = lane.len();
    let channels = lane.operating_freqs.len();
    let mut out = lane.clone();
    let mut input = vec![0.0; n];
    let mut filtered = vec![0.0; n];
    for ch in 0..channels {
        for part in [false, true] {
            for (v, s) in input.iter_mut().zip(&lane.samples) {
                *v = if part {
                    s.response[ch].im
                } else {
                    s.response[ch].re
                };
            }
            convolve_same(&input, taps, &mut filtered);
            for (s, v) in out.samples.iter_mut().zip(&filtered) {
                if part {
                    s.response[ch].im = *v;
                } else {
                    s.response[ch].re = *v;
                }
            }
        }
    }
    Ok(out)
}

/// Stacks real then imaginary parts, removes the real-block mean and scales to unit norm.
pub fn to_feature_vector(response: &[Complex64]) -> Result<FeatureVector> {
    if response.is_empty() {
        return Err(Error::invalid("empty response"));
    }
    if response
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(Error::invalid("non-finite response"));
    }
    let n = response.len();
    let real_mean = response.iter().map(|z| z.re).sum::<f64>() / n as f64;
    let mut values: Vec<f64> = response
        .iter()
        .map(|z| z.re - real_mean)
        .chain(response.iter().map(|z| z.im))
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    // Anything at rounding level of the input magnitude carries no direction.
    let scale = response
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max);
    if norm == 0.0 || norm <= 64.0 * f64::EPSILON * scale {
        return Err(Error::DegenerateSample);
    }
    values.iter_mut().for_each(|v| *v /= norm);
    Ok(FeatureVector(values))
}

/// Interprets a 2n-length stacked vector as n complex values.
pub fn unstack(values: &[f64]) -> Vec<Complex64> {
    let n = values.len() / 2;
    (0..n)
        .map(|i| Complex64::new(values[i], values[n + i]))
        .collect()
}

/// Applies [`to_feature_vector`] to every atom's raw response.
pub fn normalize_dictionary(mut dict: Dictionary) -> Result<Dictionary> {
    for atom in &mut dict.atoms {
        atom.feature = to_feature_vector(&atom.raw_response).map_err(|e| {
            Error::invalid(format!(
                "dictionary atom {} cannot be normalized: {e}",
                atom.id
            ))
        })?;
    }
    Ok(dict)
}

/// Normalized features of a lane together with their positions.
///
/// Degenerate samples are dropped; `source_index` maps back into the lane.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureLane {
    pub positions: Vec<Position>,
    pub features: Vec<FeatureVector>,
    pub source_index: Vec<usize>,
}

impl FeatureLane {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Normalizes every sample of a (filtered) lane, skipping degenerate ones.
pub fn lane_features(lane: &RawLane) -> FeatureLane {
    let mut out = FeatureLane::default();
    for (i, s) in lane.samples.iter().enumerate() {
        match to_feature_vector(&s.response) {
            Ok(f) => {
                out.positions.push(s.position());
                out.features.push(f);
                out.source_index.push(i);
            }
            Err(e) => log::warn!("lane {}: skipping sample {i}: {e}", lane.lane_id),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lane_from(channels: Vec<Vec<Complex64>>) -> RawLane {
        let n = channels[0].len();
        RawLane {
            lane_id: "t".into(),
            samples: channels
                .into_iter()
                .enumerate()
                .map(|(i, response)| SweepSample {
                    easting: i as f64 * 0.05,
                    northing: 2.0,
                    response,
                })
                .collect(),
            operating_freqs: (0..n).map(|i| 100.0 * (i + 1) as f64).collect(),
        }
    }

    fn assert_feature_contract(f: &FeatureVector) {
        let n = f.len() / 2;
        let mean = f[..n].iter().sum::<f64>() / n as f64;
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(mean.abs() < 1e-12, "real mean {mean}");
        assert!((norm - 1.0).abs() < 1e-12, "norm {norm}");
    }

    #[test]
    fn taps_are_zero_mean_unit_norm() {
        for w in [3, 5, 9, 21] {
            let t = sine_filter_taps(w).unwrap();
            assert_eq!(t.len(), w);
            assert!(t.iter().sum::<f64>().abs() < 1e-12);
            assert!((t.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn taps_are_symmetric_with_center_peak() {
        let t = sine_filter_taps(9).unwrap();
        for i in 0..9 {
            assert!((t[i] - t[8 - i]).abs() < 1e-12);
        }
        assert!(t[4] > 0.0 && t[0] < 0.0);
        assert!(t.iter().all(|v| *v <= t[4]));
    }

    #[test]
    fn taps_reject_bad_width() {
        assert!(sine_filter_taps(1).is_err());
        assert!(sine_filter_taps(4).is_err());
        assert!(sine_filter_taps(0).is_err());
    }

    #[test]
    fn constant_lane_filters_to_zero_in_interior() {
        let z = Complex64::new(3.0, -1.5);
        let lane = lane_from(vec![vec![z; 4]; 30]);
        let taps = sine_filter_taps(9).unwrap();
        let out = downtrack_filter(&lane, &taps).unwrap();
        for s in &out.samples[4..26] {
            for v in &s.response {
                assert!(v.norm() < 1e-12);
            }
        }
        assert_eq!(out.positions(), lane.positions());
    }

    #[test]
    fn impulse_reproduces_taps() {
        let taps = sine_filter_taps(5).unwrap();
        let p = 7;
        let mut ch = vec![vec![Complex64::new(0.0, 0.0); 1]; 15];
        ch[p][0] = Complex64::new(1.0, 2.0);
        let out = downtrack_filter(&lane_from(ch), &taps).unwrap();
        for (i, s) in out.samples.iter().enumerate() {
            let k = i as isize + 2 - p as isize;
            let expect = if (0..5).contains(&k) {
                taps[k as usize]
            } else {
                0.0
            };
            assert!((s.response[0].re - expect).abs() < 1e-15);
            assert!((s.response[0].im - 2.0 * expect).abs() < 1e-15);
            // Symmetric taps: the reversed kernel gives the same channel.
            let reversed = if (0..5).contains(&k) {
                taps[4 - k as usize]
            } else {
                0.0
            };
            assert!((s.response[0].re - reversed).abs() < 1e-12);
        }
    }

    #[test]
    fn filtered_pulse_peaks_at_center() {
        // Brute-force reference: direct sum with explicit zero padding.
        let sigma = 3.0;
        let center = 20.0;
        let shape = [1.0, -0.5, 0.25];
        let n = 41;
        let channels: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                let g = (-((i as f64 - center).powi(2)) / (2.0 * sigma * sigma)).exp();
                shape
                    .iter()
                    .map(|a| Complex64::new(a * g, -a * g))
                    .collect()
            })
            .collect();
        let taps = sine_filter_taps(9).unwrap();
        let out = downtrack_filter(&lane_from(channels.clone()), &taps).unwrap();
        let energy: Vec<f64> = out
            .samples
            .iter()
            .map(|s| s.response.iter().map(|z| z.norm_sqr()).sum())
            .collect();
        let mut brute = vec![0.0; n];
        for i in 0..n {
            for ch in 0..3 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, h) in taps.iter().enumerate() {
                    let j = i as isize + 4 - k as isize;
                    if j >= 0 && (j as usize) < n {
                        acc += *h * channels[j as usize][ch];
                    }
                }
                brute[i] += acc.norm_sqr();
            }
        }
        for (a, b) in energy.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-12);
        }
        let argmax = (0..n)
            .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
            .unwrap();
        assert!((argmax as f64 - center).abs() <= 1.0);
    }

    #[test]
    fn filter_rejects_short_lane() {
        let lane = lane_from(vec![vec![Complex64::new(1.0, 0.0)]; 4]);
        assert!(downtrack_filter(&lane, &sine_filter_taps(9).unwrap()).is_err());
    }

    #[test]
    fn feature_of_constant_real_sample_is_degenerate() {
        let r = vec![Complex64::new(2.5, 0.0); 21];
        assert!(matches!(
            to_feature_vector(&r),
            Err(Error::DegenerateSample)
        ));
        let zero = vec![Complex64::new(0.0, 0.0); 21];
        assert!(matches!(
            to_feature_vector(&zero),
            Err(Error::DegenerateSample)
        ));
    }

    #[test]
    fn feature_contract_on_simple_sample() {
        let mut r = vec![Complex64::new(0.0, 0.0); 21];
        r[0].re = 1.0;
        r[1].re = -1.0;
        let f = to_feature_vector(&r).unwrap();
        assert_eq!(f.len(), 42);
        assert_feature_contract(&f);
    }

    #[test]
    fn lane_features_skip_degenerate_samples() {
        let good: Vec<Complex64> = (0..4).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let bad = vec![Complex64::new(1.0, 0.0); 4];
        let lane = lane_from(vec![good.clone(), bad, good]);
        let fl = lane_features(&lane);
        assert_eq!(fl.len(), 2);
        assert_eq!(fl.source_index, vec![0, 2]);
        assert_eq!(fl.positions[1], lane.samples[2].position());
    }

    #[test]
    fn dictionary_normalization_invariances() {
        let freqs = crate::dsrf::default_operating_freqs();
        let base = crate::dsrf::dsrf_response(
            &crate::dsrf::RelaxationModel::single_pole(4000.0).unwrap(),
            &freqs,
            crate::dsrf::OmegaConvention::Angular,
        )
        .unwrap();
        let scaled: Vec<Complex64> = base.iter().map(|z| z * 5.0).collect();
        let shifted: Vec<Complex64> = base.iter().map(|z| z + 0.7).collect();
        let d = Dictionary::from_raw(
            freqs,
            vec![(4000.0, base), (4000.0, scaled), (4000.0, shifted)],
        )
        .unwrap();
        assert_feature_contract(&d.atoms[0].feature);
        for other in &d.atoms[1..] {
            for (a, b) in d.atoms[0].feature.iter().zip(other.feature.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    fn response_strategy() -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 21)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #[test]
        fn feature_contract_and_scale_invariance(r in response_strategy(), alpha in 0.01f64..100.0) {
            let f = match to_feature_vector(&r) {
                Ok(f) => f,
                Err(_) => return Ok(()),
            };
            assert_feature_contract(&f);
            let scaled: Vec<Complex64> = r.iter().map(|z| z * alpha).collect();
            let g = to_feature_vector(&scaled).unwrap();
            for (a, b) in f.iter().zip(g.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn normalization_is_idempotent(r in response_strategy()) {
            let f = match to_feature_vector(&r) {
                Ok(f) => f,
                Err(_) => return Ok(()),
            };
            let again = to_feature_vector(&unstack(&f)).unwrap();
            for (a, b) in f.iter().zip(again.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn filter_is_linear(
            a in prop::collection::vec(response_strategy(), 12),
            b in prop::collection::vec(response_strategy(), 12),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let taps = sine_filter_taps(9).unwrap();
            let mix: Vec<Vec<Complex64>> = a.iter().zip(&b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| alpha * p + beta * q).collect())
                .collect();
            let fa = downtrack_filter(&lane_from(a), &taps).unwrap();
            let fb = downtrack_filter(&lane_from(b), &taps).unwrap();
            let fm = downtrack_filter(&lane_from(mix), &taps).unwrap();
            for ((sa, sb), sm) in fa.samples.iter().zip(&fb.samples).zip(&fm.samples) {
                for ((x, y), m) in sa.response.iter().zip(&sb.response).zip(&sm.response) {
                    prop_assert!((alpha * x + beta * y - m).norm() < 1e-10);
                }
            }
        }
    }
}
