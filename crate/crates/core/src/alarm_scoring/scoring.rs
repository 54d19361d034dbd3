//! Halo scoring of alarms against ground truth and ROC sweeps.

use super::grid::Alarm;
use crate::{Error, Position, Result};

/// Default hit radius around scorable targets, meters.
pub const DEFAULT_HIT_HALO_M: f64 = 0.25;
/// Deepest scorable target, inches.
pub const DEFAULT_MAX_DEPTH_IN: f64 = 8.0;
/// Default sensor track width used to floor the lane area, meters.
pub const DEFAULT_TRACK_WIDTH_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Target,
    Clutter,
}

/// Metallic content class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetalClass {
    Metal,
    LowMetal,
    NonMetal,
    Clutter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    AntiTank,
    AntiPersonnel,
    Other,
}

macro_rules! string_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl std::str::FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $(if s.eq_ignore_ascii_case($text) { return Ok($ty::$variant); })+
                Err(Error::invalid(format!(concat!("unknown ", stringify!($ty), " '{}'"), s)))
            }
        }
    };
}

string_enum!(ObjectKind { Target => "target", Clutter => "clutter" });
string_enum!(MetalClass { Metal => "MT", LowMetal => "LMT", NonMetal => "NMT", Clutter => "CL" });
string_enum!(Purpose { AntiTank => "AT", AntiPersonnel => "AP", Other => "other" });

/// One buried object.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub easting: f64,
    pub northing: f64,
    pub kind: ObjectKind,
    pub metal: MetalClass,
    pub depth_in: f64,
    pub purpose: Purpose,
}

impl GroundTruthEntry {
    pub fn position(&self) -> Position {
        Position::new(self.easting, self.northing)
    }

    pub fn is_clutter(&self) -> bool {
        self.kind == ObjectKind::Clutter || self.metal == MetalClass::Clutter
    }
}

/// Scoring parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringRules {
    pub hit_halo_m: f64,
    /// Targets deeper than this are not scored.
    pub max_depth_in: f64,
    /// Score only targets of this purpose.
    pub purpose_filter: Option<Purpose>,
}

impl Default for ScoringRules {
    fn default() -> Self {
        Self {
            hit_halo_m: DEFAULT_HIT_HALO_M,
            max_depth_in: DEFAULT_MAX_DEPTH_IN,
            purpose_filter: None,
        }
    }
}

/// Why an alarm does not count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IgnoreReason {
    Clutter,
    Depth,
    Purpose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlarmLabel {
    Hit,
    Ignored(IgnoreReason),
    FalseAlarm,
    /// Not scored yet.
    Unscored,
}

impl AlarmLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            AlarmLabel::Hit => "hit",
            AlarmLabel::Ignored(IgnoreReason::Clutter) => "ignored_clutter",
            AlarmLabel::Ignored(IgnoreReason::Depth) => "ignored_depth",
            AlarmLabel::Ignored(IgnoreReason::Purpose) => "ignored_purpose",
            AlarmLabel::FalseAlarm => "false_alarm",
            AlarmLabel::Unscored => "unscored",
        }
    }
}

impl std::fmt::Display for AlarmLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AlarmLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hit" => AlarmLabel::Hit,
            "ignored_clutter" => AlarmLabel::Ignored(IgnoreReason::Clutter),
            "ignored_depth" => AlarmLabel::Ignored(IgnoreReason::Depth),
            "ignored_purpose" => AlarmLabel::Ignored(IgnoreReason::Purpose),
            "false_alarm" => AlarmLabel::FalseAlarm,
            "unscored" | "" => AlarmLabel::Unscored,
            other => return Err(Error::invalid(format!("unknown alarm label '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledAlarm {
    pub alarm: Alarm,
    pub label: AlarmLabel,
    /// Index into the truth list of the credited target, for hits.
    pub target: Option<usize>,
}

/// Labeled alarms (in input order) and the number of scorable targets.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub alarms: Vec<LabeledAlarm>,
    pub scorable_targets: usize,
}

impl MatchOutcome {
    pub fn count(&self, label: AlarmLabel) -> usize {
        self.alarms.iter().filter(|a| a.label == label).count()
    }
}

fn exclusion(entry: &GroundTruthEntry, rules: &ScoringRules) -> Option<IgnoreReason> {
    if entry.is_clutter() {
        Some(IgnoreReason::Clutter)
    } else if entry.depth_in > rules.max_depth_in {
        Some(IgnoreReason::Depth)
    } else if rules.purpose_filter.is_some_and(|p| p != entry.purpose) {
        Some(IgnoreReason::Purpose)
    } else {
        None
    }
}

/// Labels each alarm as a hit, ignored, or a false alarm.
///
/// Alarms are visited by descending confidence; each scorable target is
/// credited to at most one alarm (the nearest uncredited target within the
/// hit halo wins). Alarms near clutter, too-deep targets or filtered-out
/// purposes are ignored; a scorable target takes precedence over them.
pub fn match_alarms(
    alarms: &[Alarm],
    truth: &[GroundTruthEntry],
    rules: &ScoringRules,
) -> Result<MatchOutcome> {
    if !(rules.hit_halo_m >= 0.0 && rules.hit_halo_m.is_finite()) {
        return Err(Error::invalid(format!(
            "hit halo must be >= 0, got {}",
            rules.hit_halo_m
        )));
    }
    let exclusions: Vec<Option<IgnoreReason>> = truth.iter().map(|t| exclusion(t, rules)).collect();
    let scorable_targets = exclusions.iter().filter(|e| e.is_none()).count();

    let mut order: Vec<usize> = (0..alarms.len()).collect();
    order.sort_by(|&a, &b| {
        alarms[b]
            .confidence
            .total_cmp(&alarms[a].confidence)
            .then(a.cmp(&b))
    });

    let mut credited = vec![false; truth.len()];
    let mut labeled: Vec<LabeledAlarm> = alarms
        .iter()
        .map(|&alarm| LabeledAlarm {
            alarm,
            label: AlarmLabel::FalseAlarm,
            target: None,
        })
        .collect();
    for i in order {
        let pos = alarms[i].position();
        let near = |j: &usize| truth[*j].position().distance(&pos) <= rules.hit_halo_m;
        let hit = (0..truth.len())
            .filter(|j| exclusions[*j].is_none() && !credited[*j])
            .filter(near)
            .min_by(|&a, &b| {
                truth[a]
                    .position()
                    .distance(&pos)
                    .total_cmp(&truth[b].position().distance(&pos))
            });
        if let Some(j) = hit {
            credited[j] = true;
            labeled[i].label = AlarmLabel::Hit;
            labeled[i].target = Some(j);
            continue;
        }
        let ignored = (0..truth.len())
            .filter(|j| exclusions[*j].is_some())
            .filter(near)
            .min_by(|&a, &b| {
                truth[a]
                    .position()
                    .distance(&pos)
                    .total_cmp(&truth[b].position().distance(&pos))
            });
        if let Some(j) = ignored {
            labeled[i].label = AlarmLabel::Ignored(exclusions[j].expect("filtered above"));
        }
    }
    Ok(MatchOutcome {
        alarms: labeled,
        scorable_targets,
    })
}

/// One ROC operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pd: f64,
    /// False alarms per square meter.
    pub far: f64,
}

/// Operating points in order of decreasing threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Best probability of detection with a false alarm rate at most `far`.
    pub fn pd_at_far(&self, far: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.far <= far)
            .map(|p| p.pd)
            .fold(0.0, f64::max)
    }

    pub fn final_pd(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.pd)
    }
}

/// Sweeps the threshold down through every distinct alarm confidence.
///
/// The last point has threshold `-inf` and covers every alarm.
pub fn roc(
    alarms: &[LabeledAlarm],
    scorable_targets: usize,
    lane_area_m2: f64,
) -> Result<RocCurve> {
    if !(lane_area_m2 > 0.0 && lane_area_m2.is_finite()) {
        return Err(Error::invalid(format!(
            "lane area must be positive, got {lane_area_m2}"
        )));
    }
    let mut sorted: Vec<&LabeledAlarm> = alarms.iter().collect();
    sorted.sort_by(|a, b| b.alarm.confidence.total_cmp(&a.alarm.confidence));
    let pd = |hits: usize| {
        if scorable_targets == 0 {
            0.0
        } else {
            hits as f64 / scorable_targets as f64
        }
    };

    let mut points = Vec::new();
    let (mut hits, mut false_alarms) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].alarm.confidence;
        while i < sorted.len() && sorted[i].alarm.confidence == threshold {
            match sorted[i].label {
                AlarmLabel::Hit => hits += 1,
                AlarmLabel::FalseAlarm => false_alarms += 1,
                _ => {}
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            pd: pd(hits),
            far: false_alarms as f64 / lane_area_m2,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        pd: pd(hits),
        far: false_alarms as f64 / lane_area_m2,
    });
    Ok(RocCurve { points })
}

/// Bounding-box area of the sample positions with each side floored at the
/// sensor track width.
pub fn lane_area(positions: &[Position], track_width_m: f64) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::invalid("no positions"));
    }
    if !(track_width_m > 0.0) {
        return Err(Error::invalid(format!(
            "track width must be positive, got {track_width_m}"
        )));
    }
    let span = |f: fn(&Position) -> f64| {
        let lo = positions.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = positions.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (hi - lo).max(track_width_m)
    };
    Ok(span(|p| p.easting) * span(|p| p.northing))
}
