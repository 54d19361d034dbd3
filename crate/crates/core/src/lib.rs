//! Buried-object detection for wideband electromagnetic-induction (WEMI) lanes.
//!
//! The processing chain is:
//!
//! 1. **Dictionary** – single-pole relaxation-frequency target signatures ([`dsrf`]).
//! 2. **Preprocessing** – down-track zero-mean sine filtering and 42-dim
//!    normalization of the complex sweeps ([`preprocessing`]).
//! 3. **Detection** – Global ACE, Woodbury-updated ACE (WACE), JOMP and the
//!    Energy baseline ([`detectors`]).
//! 4. **Alarms and scoring** – grid rasterization, iterative peak extraction
//!    with halo suppression, halo-based truth matching and ROC sweeps
//!    ([`alarm_scoring`]).
//!
//! [`lane_sim`] generates synthetic lanes with known ground truth and
//! [`pipeline`] wires everything together behind file-based stages.

pub mod alarm_scoring;
pub mod detectors;
pub mod dsrf;
mod error;
pub mod io;
pub mod lane_sim;
pub mod pipeline;
pub mod preprocessing;

pub use error::{Error, Result};

/// Planar UTM position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub easting: f64,
    pub northing: f64,
}

impl Position {
    pub fn new(easting: f64, northing: f64) -> Self {
        Self { easting, northing }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.easting - other.easting).hypot(self.northing - other.northing)
    }
}
