//! Detection statistics: Global ACE, WACE, JOMP and Energy.

mod ace;
mod background;
mod energy;
mod omp;

pub use ace::{
    ace_confidence, ace_statistic, detect_global_ace, detect_wace, AceScorer, WaceConfig,
};
pub use background::{
    estimate_background, update_inverse_covariance, update_mean, BackgroundModel, UpdateMode,
    DEFAULT_RIDGE,
};
pub use energy::{detect_energy, sample_energy};
pub use omp::{
    detect_jomp, joint_omp, jomp_confidence, omp, OmpResult, DEFAULT_JOMP_OFFSET, DEFAULT_SPARSITY,
};

use crate::Error;

/// Per-sample confidences of one detector, aligned with its input samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceTrace {
    pub detector: String,
    pub confidences: Vec<f64>,
}

impl ConfidenceTrace {
    pub fn new(detector: impl Into<String>, confidences: Vec<f64>) -> Self {
        Self {
            detector: detector.into(),
            confidences,
        }
    }

    pub fn len(&self) -> usize {
        self.confidences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confidences.is_empty()
    }
}

/// The four detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    AceGlobal,
    Wace,
    Jomp,
    Energy,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::AceGlobal,
        Method::Wace,
        Method::Jomp,
        Method::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::AceGlobal => "ace-global",
            Method::Wace => "wace",
            Method::Jomp => "jomp",
            Method::Energy => "energy",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown detector '{s}'")))
    }
}
