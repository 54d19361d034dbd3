//! Synthetic lanes with known ground truth.
//!
//! A lane is a straight down-track line of sweeps. Each sweep is a Gaussian
//! sensor-noise draw in the stacked real/imaginary space, plus a soil
//! response whose amplitude wanders along track, plus a slow real drift, plus
//! every target's dictionary signature weighted by a Gaussian bump in
//! down-track distance. Target amplitudes are set from a peak
//! signal-to-background energy ratio and attenuated by `2^(-depth_in / 4)`.
//! None of this is a physical soil or coil model.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::alarm_scoring::{GroundTruthEntry, MetalClass, ObjectKind, Purpose};
use crate::dsrf::{Dictionary, OPERATING_FREQ_COUNT};
use crate::preprocessing::{RawLane, SweepSample};
use crate::{Error, Position, Result};

/// Default down-track sample spacing, meters.
pub const DEFAULT_SAMPLE_SPACING_M: f64 = 0.05;
/// Default along-track standard deviation of a target's footprint, meters.
pub const DEFAULT_SPATIAL_SIGMA_M: f64 = 0.15;
/// Default channel correlation of the background.
pub const DEFAULT_CHANNEL_CORRELATION: f64 = 0.7;
/// Default soil energy over sensor-noise energy, dB.
pub const DEFAULT_SOIL_TO_NOISE_DB: f64 = 6.0;
/// Default along-track correlation length of the soil amplitude, meters.
pub const DEFAULT_SOIL_CORRELATION_M: f64 = 0.25;
/// Default soil loss factor.
pub const DEFAULT_SOIL_LOSS: f64 = 0.15;

/// Background statistics in the stacked 42-dim space.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSpec {
    /// Sensor-noise mean and covariance.
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Standard deviation of the soil amplitude; the soil signature has unit norm.
    pub soil_std: f64,
    /// Along-track correlation length of the soil amplitude (AR(1)), meters.
    pub soil_correlation_m: f64,
    /// Loss factor of the soil signature, see [`soil_signature`].
    pub soil_loss: f64,
    /// Amplitude of a slow sinusoidal shift added to every real channel.
    pub drift_amplitude: f64,
    pub drift_period_m: f64,
}

impl BackgroundSpec {
    /// Zero-mean noise with unit variance and correlation `rho^|i-j|` across
    /// the stacked channels, and no soil.
    pub fn correlated(dim: usize, rho: f64) -> Self {
        Self {
            mean: vec![0.0; dim],
            covariance: DMatrix::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs())),
            soil_std: 0.0,
            soil_correlation_m: DEFAULT_SOIL_CORRELATION_M,
            soil_loss: DEFAULT_SOIL_LOSS,
            drift_amplitude: 0.5,
            drift_period_m: 20.0,
        }
    }

    /// [`correlated`](Self::correlated) noise plus soil carrying
    /// `soil_to_noise_db` more energy than the noise.
    pub fn with_soil(dim: usize, rho: f64, soil_to_noise_db: f64) -> Self {
        let mut bg = Self::correlated(dim, rho);
        bg.soil_std = (bg.covariance.trace() * 10f64.powf(soil_to_noise_db / 10.0)).sqrt();
        bg
    }

    /// Expected squared norm of a background draw (drift excluded).
    pub fn mean_energy(&self) -> f64 {
        self.covariance.trace()
            + self.mean.iter().map(|v| v * v).sum::<f64>()
            + self.soil_std.powi(2)
    }
}

/// Unit-norm response of a magnetically viscous soil,
/// `1 - (2 / pi) loss ln(f / f_0) - j loss`, with `f_0` the lowest frequency.
pub fn soil_signature(freqs: &[f64], loss: f64) -> Vec<Complex64> {
    let f0 = freqs.first().copied().unwrap_or(1.0);
    let raw: Vec<Complex64> = freqs
        .iter()
        .map(|f| {
            Complex64::new(
                1.0 - 2.0 / std::f64::consts::PI * loss * (f / f0).ln(),
                -loss,
            )
        })
        .collect();
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|z| z / norm).collect()
}

/// One buried object.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    pub along_track_m: f64,
    pub atom_index: usize,
    /// Peak signal energy over mean background energy before depth attenuation.
    pub amplitude_snr_db: f64,
    pub spatial_sigma_m: f64,
    pub depth_in: f64,
    pub kind: ObjectKind,
    pub metal: MetalClass,
    pub purpose: Purpose,
}

impl TargetSpec {
    /// Amplitude factor applied for burial depth.
    pub fn depth_attenuation(&self) -> f64 {
        2f64.powf(-self.depth_in / 4.0)
    }

    /// Peak signal-to-background energy ratio after depth attenuation, dB.
    pub fn effective_snr_db(&self) -> f64 {
        self.amplitude_snr_db + 20.0 * self.depth_attenuation().log10()
    }
}

/// Complete description of a synthetic lane.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub lane_length_m: f64,
    pub sample_spacing_m: f64,
    pub track_width_m: f64,
    /// UTM position of the first sample; the lane runs due east.
    pub origin: Position,
    pub background: BackgroundSpec,
    pub targets: Vec<TargetSpec>,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn sample_count(&self) -> usize {
        (self.lane_length_m / self.sample_spacing_m + 1e-9).floor() as usize + 1
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self, dict: &Dictionary) -> Result<()> {
        if !(self.sample_spacing_m > 0.0 && self.lane_length_m > 0.0 && self.track_width_m > 0.0) {
            return Err(Error::invalid(
                "lane length, spacing and track width must be positive",
            ));
        }
        let dim = 2 * dict.operating_freqs.len();
        let bg = &self.background;
        if bg.mean.len() != dim || bg.covariance.nrows() != dim || bg.covariance.ncols() != dim {
            return Err(Error::invalid(format!(
                "background must be {dim}-dimensional to match the dictionary"
            )));
        }
        if !(bg.drift_period_m > 0.0) {
            return Err(Error::invalid("drift period must be positive"));
        }
        if !(bg.soil_std >= 0.0 && bg.soil_correlation_m > 0.0 && bg.soil_loss.is_finite()) {
            return Err(Error::invalid(
                "soil needs std >= 0 and a positive correlation length",
            ));
        }
        for (i, t) in self.targets.iter().enumerate() {
            if !(0.0..=self.lane_length_m).contains(&t.along_track_m) {
                return Err(Error::invalid(format!("target {i} lies outside the lane")));
            }
            if !(t.spatial_sigma_m > 0.0) {
                return Err(Error::invalid(format!(
                    "target {i} needs a positive footprint"
                )));
            }
            if t.atom_index >= dict.len() {
                return Err(Error::invalid(format!(
                    "target {i} uses atom {} of a {}-atom dictionary",
                    t.atom_index,
                    dict.len()
                )));
            }
            if !(t.depth_in >= 0.0) {
                return Err(Error::invalid(format!("target {i} has a negative depth")));
            }
        }
        Ok(())
    }
}

/// Generates the sweeps and the ground truth of a scenario.
pub fn generate_lane(
    scenario: &Scenario,
    dict: &Dictionary,
) -> Result<(RawLane, Vec<GroundTruthEntry>)> {
    scenario.validate(dict)?;
    let freqs = dict.operating_freqs.len();
    let dim = 2 * freqs;
    let bg = &scenario.background;
    let factor = bg
        .covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::invalid("background covariance is not positive definite"))?
        .unpack();
    let mean = DVector::from_column_slice(&bg.mean);
    let bg_energy = bg.mean_energy();

    let amplitudes: Vec<f64> = scenario
        .targets
        .iter()
        .map(|t| {
            let atom_energy: f64 = dict.atoms[t.atom_index]
                .raw_response
                .iter()
                .map(|z| z.norm_sqr())
                .sum();
            (10f64.powf(t.amplitude_snr_db / 10.0) * bg_energy / atom_energy).sqrt()
                * t.depth_attenuation()
        })
        .collect();

    let soil = soil_signature(&dict.operating_freqs, bg.soil_loss);
    let phi = (-scenario.sample_spacing_m / bg.soil_correlation_m).exp();
    let innovation = (1.0 - phi * phi).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
    let mut soil_level: f64 = rng.sample(StandardNormal);
    let samples = (0..scenario.sample_count())
        .map(|i| {
            let along = i as f64 * scenario.sample_spacing_m;
            let z = DVector::<f64>::from_fn(dim, |_, _| rng.sample(StandardNormal));
            if i > 0 {
                soil_level = phi * soil_level + innovation * rng.sample::<f64, _>(StandardNormal);
            }
            let draw = &mean + &factor * z;
            let drift =
                bg.drift_amplitude * (2.0 * std::f64::consts::PI * along / bg.drift_period_m).sin();
            let mut response: Vec<Complex64> = (0..freqs)
                .map(|f| {
                    Complex64::new(draw[f] + drift, draw[freqs + f])
                        + soil[f] * (bg.soil_std * soil_level)
                })
                .collect();
            for (t, amp) in scenario.targets.iter().zip(&amplitudes) {
                let delta = along - t.along_track_m;
                let weight = amp * (-delta * delta / (2.0 * t.spatial_sigma_m.powi(2))).exp();
                if weight < 1e-300 {
                    continue;
                }
                for (r, h) in response
                    .iter_mut()
                    .zip(&dict.atoms[t.atom_index].raw_response)
                {
                    *r += weight * h;
                }
            }
            SweepSample {
                easting: scenario.origin.easting + along,
                northing: scenario.origin.northing,
                response,
            }
        })
        .collect();

    let truth = scenario
        .targets
        .iter()
        .map(|t| GroundTruthEntry {
            easting: scenario.origin.easting + t.along_track_m,
            northing: scenario.origin.northing,
            kind: t.kind,
            metal: t.metal,
            depth_in: t.depth_in,
            purpose: t.purpose,
        })
        .collect();

    Ok((
        RawLane {
            lane_id: scenario.name.clone(),
            samples,
            operating_freqs: dict.operating_freqs.clone(),
        },
        truth,
    ))
}

// ── Presets ────────────────────────────────────────────────────────────────

/// Start of the first object, clear of the WACE initialization window.
const LEAD_IN_M: f64 = 12.0;
const LEAD_OUT_M: f64 = 6.0;
const OBJECT_PITCH_M: f64 = 3.0;

struct ClassDefaults {
    metal: MetalClass,
    snr_db: f64,
    depths: &'static [f64],
    atoms: &'static [usize],
}

const METAL: ClassDefaults = ClassDefaults {
    metal: MetalClass::Metal,
    snr_db: 12.0,
    depths: &[2.0, 4.0, 6.0, 10.0],
    atoms: &[12, 25, 38, 50],
};
const LOW_METAL: ClassDefaults = ClassDefaults {
    metal: MetalClass::LowMetal,
    snr_db: 6.0,
    depths: &[1.0, 3.0, 5.0, 9.0],
    atoms: &[55, 65, 75, 85],
};
const NON_METAL: ClassDefaults = ClassDefaults {
    metal: MetalClass::NonMetal,
    snr_db: -3.0,
    depths: &[2.0, 4.0],
    atoms: &[60],
};
const CLUTTER: ClassDefaults = ClassDefaults {
    metal: MetalClass::Clutter,
    snr_db: 9.0,
    depths: &[1.0, 2.0, 3.0],
    atoms: &[8, 30, 70, 95],
};

fn object(class: &ClassDefaults, nth: usize, along: f64) -> TargetSpec {
    let clutter = class.metal == MetalClass::Clutter;
    let purpose = match class.metal {
        MetalClass::Clutter => Purpose::Other,
        MetalClass::Metal if nth % 2 == 0 => Purpose::AntiTank,
        _ => Purpose::AntiPersonnel,
    };
    TargetSpec {
        along_track_m: along,
        atom_index: class.atoms[nth % class.atoms.len()],
        amplitude_snr_db: class.snr_db,
        spatial_sigma_m: DEFAULT_SPATIAL_SIGMA_M,
        depth_in: class.depths[nth % class.depths.len()],
        kind: if clutter {
            ObjectKind::Clutter
        } else {
            ObjectKind::Target
        },
        metal: class.metal,
        purpose,
    }
}

/// Interleaves the object classes round-robin along the lane.
fn composed_lane(name: &str, counts: [usize; 4], pitch: f64) -> Scenario {
    let classes = [&METAL, &LOW_METAL, &NON_METAL, &CLUTTER];
    let mut emitted = [0usize; 4];
    let mut targets = Vec::new();
    while emitted.iter().zip(&counts).any(|(e, c)| e < c) {
        for (k, class) in classes.iter().enumerate() {
            if emitted[k] < counts[k] {
                let along = LEAD_IN_M + targets.len() as f64 * pitch;
                targets.push(object(class, emitted[k], along));
                emitted[k] += 1;
            }
        }
    }
    let last = targets
        .last()
        .map_or(LEAD_IN_M, |t: &TargetSpec| t.along_track_m);
    Scenario {
        name: name.to_string(),
        lane_length_m: last + LEAD_OUT_M,
        sample_spacing_m: DEFAULT_SAMPLE_SPACING_M,
        track_width_m: crate::alarm_scoring::DEFAULT_TRACK_WIDTH_M,
        origin: Position::new(0.0, 0.0),
        background: BackgroundSpec::with_soil(
            2 * OPERATING_FREQ_COUNT,
            DEFAULT_CHANNEL_CORRELATION,
            DEFAULT_SOIL_TO_NOISE_DB,
        ),
        targets,
        rng_seed: 0,
    }
}

/// Object counts per lane: metal, low-metal, non-metal targets and clutter.
pub const TABLE_LANES: [(&str, [usize; 4]); 6] = [
    ("lane1", [4, 7, 0, 6]),
    ("lane2", [4, 10, 0, 4]),
    ("lane3", [4, 7, 0, 8]),
    ("lane4", [6, 6, 3, 0]),
    ("lane5", [7, 5, 5, 0]),
    ("lane6", [6, 6, 2, 3]),
];

/// Shallow, strong metal and low-metal targets with a few clutter objects.
fn easy_lane() -> Scenario {
    let mut s = composed_lane("easy", [6, 6, 0, 3], 4.0);
    for t in s
        .targets
        .iter_mut()
        .filter(|t| t.kind == ObjectKind::Target)
    {
        t.amplitude_snr_db = 15.0;
        t.depth_in = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0][(t.along_track_m as usize / 4) % 6];
    }
    s
}

/// Weak, deeper targets among stronger clutter.
fn hard_lane() -> Scenario {
    let mut s = composed_lane("hard", [5, 7, 2, 6], 3.0);
    for t in s.targets.iter_mut() {
        if t.kind == ObjectKind::Target && t.metal != MetalClass::NonMetal {
            t.amplitude_snr_db = 6.0;
        }
        if t.kind == ObjectKind::Clutter {
            t.amplitude_snr_db = 12.0;
        }
    }
    s
}

/// The six composition lanes followed by `easy` and `hard`.
pub fn preset_scenarios() -> Vec<Scenario> {
    let mut out: Vec<Scenario> = TABLE_LANES
        .iter()
        .map(|(name, counts)| composed_lane(name, *counts, OBJECT_PITCH_M))
        .collect();
    out.push(easy_lane());
    out.push(hard_lane());
    out
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<Scenario> {
    preset_scenarios()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::invalid(format!("unknown preset '{name}'")))
}
