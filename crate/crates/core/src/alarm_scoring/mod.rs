//! Alarm generation by iterative peak extraction on a confidence grid, and
//! halo-based scoring into ROC curves.

mod grid;
mod scoring;

pub use grid::{
    extract_alarms, rasterize, Alarm, ConfidenceGrid, DEFAULT_ALARM_HALO_M, DEFAULT_CELL_SIZE_M,
};
pub use scoring::{
    lane_area, match_alarms, roc, AlarmLabel, GroundTruthEntry, IgnoreReason, LabeledAlarm,
    MatchOutcome, MetalClass, ObjectKind, Purpose, RocCurve, RocPoint, ScoringRules,
    DEFAULT_HIT_HALO_M, DEFAULT_MAX_DEPTH_IN, DEFAULT_TRACK_WIDTH_M,
};
