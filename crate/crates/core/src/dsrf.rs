//! Discrete Spectrum of Relaxation Frequencies (DSRF) target dictionary.
//!
//! The EMI frequency response of a metallic object is modeled as
//!
//! ```text
//! H(w) = c0 + sum_k c_k / (1 + j w / zeta_k)
//! ```
//!
//! with real amplitudes `c_k` and relaxation frequencies `zeta_k`. The
//! dictionary holds one single-pole response per relaxation frequency,
//! sampled at the sensor's operating frequencies and normalized exactly like
//! sensor data.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::preprocessing::{self, FeatureVector};
use crate::{Error, Result};

/// Number of operating frequencies of the sensor.
pub const OPERATING_FREQ_COUNT: usize = 21;
/// Default lowest operating frequency, Hz.
pub const DEFAULT_OP_FREQ_MIN_HZ: f64 = 300.0;
/// Default highest operating frequency, Hz.
pub const DEFAULT_OP_FREQ_MAX_HZ: f64 = 90_000.0;
/// Default atom count.
pub const DEFAULT_ATOM_COUNT: usize = 100;
/// Lowest relaxation frequency of the default dictionary.
pub const DEFAULT_ZETA_MIN: f64 = 45.0;
/// Highest relaxation frequency of the default dictionary.
pub const DEFAULT_ZETA_MAX: f64 = 670_000.0;

/// How an operating frequency in Hz maps onto the `w` of the response model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaConvention {
    /// `w = 2 pi f`.
    #[default]
    Angular,
    /// `w = f`.
    Plain,
}

impl OmegaConvention {
    pub fn omega(self, freq_hz: f64) -> f64 {
        match self {
            OmegaConvention::Angular => 2.0 * PI * freq_hz,
            OmegaConvention::Plain => freq_hz,
        }
    }
}

impl std::fmt::Display for OmegaConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OmegaConvention::Angular => "angular",
            OmegaConvention::Plain => "plain",
        })
    }
}

impl std::str::FromStr for OmegaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angular" => Ok(OmegaConvention::Angular),
            "plain" => Ok(OmegaConvention::Plain),
            other => Err(Error::invalid(format!(
                "unknown omega convention '{other}'"
            ))),
        }
    }
}

/// `count` logarithmically spaced values from `f_min` to `f_max`, both endpoints exact.
///
/// `count == 1` yields `[f_min]`.
pub fn log_spaced(count: usize, f_min: f64, f_max: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("log_spaced needs count >= 1"));
    }
    if !(f_min.is_finite() && f_max.is_finite()) || f_min <= 0.0 || f_max <= f_min {
        return Err(Error::invalid(format!(
            "log_spaced needs 0 < f_min < f_max, got [{f_min}, {f_max}]"
        )));
    }
    if count == 1 {
        return Ok(vec![f_min]);
    }
    let (lo, hi) = (f_min.ln(), f_max.ln());
    let step = (hi - lo) / (count - 1) as f64;
    let mut out: Vec<f64> = (0..count).map(|i| (lo + step * i as f64).exp()).collect();
    out[0] = f_min;
    out[count - 1] = f_max;
    Ok(out)
}

/// Multi-pole relaxation model.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationModel {
    pub shift: f64,
    pub amplitudes: Vec<f64>,
    pub relaxation_freqs: Vec<f64>,
}

impl RelaxationModel {
    pub fn new(shift: f64, amplitudes: Vec<f64>, relaxation_freqs: Vec<f64>) -> Result<Self> {
        let model = Self {
            shift,
            amplitudes,
            relaxation_freqs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Single relaxation term with zero shift and unit amplitude.
    pub fn single_pole(zeta: f64) -> Result<Self> {
        Self::new(0.0, vec![1.0], vec![zeta])
    }

    pub fn order(&self) -> usize {
        self.amplitudes.len()
    }

    fn validate(&self) -> Result<()> {
        if self.amplitudes.is_empty() || self.amplitudes.len() != self.relaxation_freqs.len() {
            return Err(Error::invalid(format!(
                "model has {} amplitudes and {} relaxation frequencies",
                self.amplitudes.len(),
                self.relaxation_freqs.len()
            )));
        }
        if let Some(z) = self
            .relaxation_freqs
            .iter()
            .find(|z| !(z.is_finite() && **z > 0.0))
        {
            return Err(Error::invalid(format!(
                "relaxation frequency must be positive, got {z}"
            )));
        }
        Ok(())
    }

    /// Response at a (signed) model frequency `w`.
    pub fn response_at_omega(&self, omega: f64) -> Complex64 {
        let mut h = Complex64::new(self.shift, 0.0);
        for (c, zeta) in self.amplitudes.iter().zip(&self.relaxation_freqs) {
            h += *c / Complex64::new(1.0, omega / zeta);
        }
        h
    }
}

/// Evaluates the relaxation model at each frequency in Hz.
pub fn dsrf_response(
    model: &RelaxationModel,
    eval_freqs: &[f64],
    convention: OmegaConvention,
) -> Result<Vec<Complex64>> {
    model.validate()?;
    if eval_freqs.is_empty() {
        return Err(Error::invalid("no evaluation frequencies"));
    }
    if let Some(f) = eval_freqs.iter().find(|f| !(f.is_finite() && **f >= 0.0)) {
        return Err(Error::invalid(format!(
            "evaluation frequency {f} is not >= 0"
        )));
    }
    Ok(eval_freqs
        .iter()
        .map(|&f| model.response_at_omega(convention.omega(f)))
        .collect())
}

/// One dictionary element.
#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryAtom {
    pub id: usize,
    pub relaxation_freq: f64,
    pub raw_response: Vec<Complex64>,
    pub feature: FeatureVector,
}

/// Ordered set of normalized target signatures.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    pub operating_freqs: Vec<f64>,
    pub atoms: Vec<DictionaryAtom>,
}

impl Dictionary {
    /// Assembles a dictionary from raw responses and normalizes every atom.
    pub fn from_raw(operating_freqs: Vec<f64>, raw: Vec<(f64, Vec<Complex64>)>) -> Result<Self> {
        let atoms = raw
            .into_iter()
            .enumerate()
            .map(|(id, (relaxation_freq, raw_response))| {
                if raw_response.len() != operating_freqs.len() {
                    return Err(Error::invalid(format!(
                        "atom {id} has {} responses, expected {}",
                        raw_response.len(),
                        operating_freqs.len()
                    )));
                }
                Ok(DictionaryAtom {
                    id,
                    relaxation_freq,
                    raw_response,
                    feature: FeatureVector::default(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        preprocessing::normalize_dictionary(Dictionary {
            operating_freqs,
            atoms,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn features(&self) -> impl Iterator<Item = &FeatureVector> {
        self.atoms.iter().map(|a| &a.feature)
    }
}

/// The default 21 operating frequencies.
pub fn default_operating_freqs() -> Vec<f64> {
    log_spaced(
        OPERATING_FREQ_COUNT,
        DEFAULT_OP_FREQ_MIN_HZ,
        DEFAULT_OP_FREQ_MAX_HZ,
    )
    .expect("default operating frequencies are valid")
}

/// Builds a single-pole dictionary with `atom_count` relaxation frequencies
/// log-spaced over `[zeta_min, zeta_max]`.
pub fn build_dictionary(
    operating_freqs: &[f64],
    atom_count: usize,
    zeta_min: f64,
    zeta_max: f64,
    convention: OmegaConvention,
) -> Result<Dictionary> {
    if operating_freqs.is_empty() {
        return Err(Error::invalid("no operating frequencies"));
    }
    if operating_freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "operating frequencies must be strictly increasing",
        ));
    }
    let zetas = log_spaced(atom_count, zeta_min, zeta_max)?;
    let raw = zetas
        .into_iter()
        .map(|zeta| {
            let model = RelaxationModel::single_pole(zeta)?;
            Ok((zeta, dsrf_response(&model, operating_freqs, convention)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Dictionary::from_raw(operating_freqs.to_vec(), raw)
}

/// The 100-atom, 45 to 670000 dictionary over the default operating frequencies.
pub fn default_dictionary() -> Dictionary {
    build_dictionary(
        &default_operating_freqs(),
        DEFAULT_ATOM_COUNT,
        DEFAULT_ZETA_MIN,
        DEFAULT_ZETA_MAX,
        OmegaConvention::Angular,
    )
    .expect("default dictionary parameters are valid")
}
