//! Energy baseline: summed response magnitudes.

use super::ConfidenceTrace;
use crate::preprocessing::{RawLane, SweepSample};
use crate::{Error, Result};

/// Sum of `|H(f)|` over the operating frequencies of one sample.
pub fn sample_energy(sample: &SweepSample) -> f64 {
    sample.response.iter().map(|z| z.norm()).sum()
}

/// Energy confidence of every sample of a filtered, un-normalized lane.
pub fn detect_energy(lane: &RawLane) -> Result<ConfidenceTrace> {
    if lane.is_empty() {
        return Err(Error::invalid("empty lane"));
    }
    Ok(ConfidenceTrace::new(
        "energy",
        lane.samples.iter().map(sample_energy).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn sample(response: Vec<Complex64>) -> SweepSample {
        SweepSample {
            easting: 0.0,
            northing: 0.0,
            response,
        }
    }

    #[test]
    fn unit_magnitudes_sum_to_count() {
        let r: Vec<Complex64> = (0..21)
            .map(|i| Complex64::from_polar(1.0, i as f64 * 0.3))
            .collect();
        assert!((sample_energy(&sample(r)) - 21.0).abs() < 1e-12);
        assert_eq!(
            sample_energy(&sample(vec![Complex64::new(0.0, 0.0); 21])),
            0.0
        );
    }

    #[test]
    fn empty_lane_is_rejected() {
        let lane = RawLane {
            lane_id: "x".into(),
            samples: vec![],
            operating_freqs: vec![1.0],
        };
        assert!(detect_energy(&lane).is_err());
    }

    proptest! {
        #[test]
        fn energy_is_homogeneous_and_order_free(
            parts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 21),
            alpha in 0.0f64..50.0,
            rot in 0usize..21,
        ) {
            let r: Vec<Complex64> = parts.iter().map(|(a, b)| Complex64::new(*a, *b)).collect();
            let e = sample_energy(&sample(r.clone()));
            let scaled: Vec<Complex64> = r.iter().map(|z| z * alpha).collect();
            prop_assert!((sample_energy(&sample(scaled)) - alpha * e).abs() <= 1e-10 * (1.0 + alpha * e));
            let mut permuted = r.clone();
            permuted.rotate_left(rot);
            permuted.reverse();
            prop_assert!((sample_energy(&sample(permuted)) - e).abs() < 1e-10);
        }
    }
}
