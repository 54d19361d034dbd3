//! End-to-end runs: configuration, stage sequencing, artifacts and reports.
//!
//! A run writes every intermediate product in the same file formats the
//! individual CLI stages consume, so any stage can be re-run on its own.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::alarm_scoring::{
    extract_alarms, lane_area, match_alarms, rasterize, roc, Alarm, AlarmLabel, ConfidenceGrid,
    GroundTruthEntry, LabeledAlarm, MatchOutcome, Purpose, RocCurve, ScoringRules,
    DEFAULT_ALARM_HALO_M, DEFAULT_CELL_SIZE_M, DEFAULT_TRACK_WIDTH_M,
};
use crate::detectors::{
    detect_energy, detect_global_ace, detect_jomp, detect_wace, ConfidenceTrace, Method,
    UpdateMode, WaceConfig, DEFAULT_JOMP_OFFSET, DEFAULT_RIDGE, DEFAULT_SPARSITY,
};
use crate::dsrf::{
    build_dictionary, log_spaced, Dictionary, OmegaConvention, DEFAULT_ATOM_COUNT,
    DEFAULT_OP_FREQ_MAX_HZ, DEFAULT_OP_FREQ_MIN_HZ, DEFAULT_ZETA_MAX, DEFAULT_ZETA_MIN,
    OPERATING_FREQ_COUNT,
};
use crate::preprocessing::{
    downtrack_filter, lane_features, sine_filter_taps, RawLane, DEFAULT_FILTER_WIDTH,
};
use crate::{io, lane_sim, Error, Position, Result};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "EMI_ACE_SEED";

/// FAR points at which reports list Pd, in false alarms per square meter.
pub const REPORT_FAR_GRID: [f64; 6] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5];

/// Denominator of the false alarm rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FarUnit {
    /// False alarms per square meter of lane.
    #[default]
    PerSquareMeter,
    /// Raw false alarm count.
    Count,
}

impl std::str::FromStr for FarUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "per-m2" | "area" => Ok(FarUnit::PerSquareMeter),
            "count" => Ok(FarUnit::Count),
            _ => Err(Error::invalid(format!(
                "unknown FAR unit '{s}' (per-m2|count)"
            ))),
        }
    }
}

impl std::fmt::Display for FarUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FarUnit::PerSquareMeter => "per-m2",
            FarUnit::Count => "count",
        })
    }
}

/// Parameters shared by the detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub wace: WaceConfig,
    pub jomp_offset: usize,
    pub sparsity: usize,
    /// Ridge for every background estimate.
    pub ridge: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            wace: WaceConfig::default(),
            jomp_offset: DEFAULT_JOMP_OFFSET,
            sparsity: DEFAULT_SPARSITY,
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// Everything a run needs. Keys of the config file match the CLI flag names.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Simulate this preset instead of reading `lane`/`truth`.
    pub preset: Option<String>,
    pub lane: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    /// Dictionary CSV; built from the dictionary parameters when absent.
    pub dict: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub methods: Vec<Method>,
    pub freq_count: usize,
    pub freq_min_hz: f64,
    pub freq_max_hz: f64,
    pub atom_count: usize,
    pub zeta_min: f64,
    pub zeta_max: f64,
    pub omega: OmegaConvention,
    pub filter_width: usize,
    pub detectors: DetectorParams,
    pub cell_size_m: f64,
    pub alarm_halo_m: f64,
    pub scoring: ScoringRules,
    pub track_width_m: f64,
    pub far_unit: FarUnit,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preset: None,
            lane: None,
            truth: None,
            dict: None,
            out_dir: PathBuf::from("out"),
            seed: None,
            methods: Method::ALL.to_vec(),
            freq_count: OPERATING_FREQ_COUNT,
            freq_min_hz: DEFAULT_OP_FREQ_MIN_HZ,
            freq_max_hz: DEFAULT_OP_FREQ_MAX_HZ,
            atom_count: DEFAULT_ATOM_COUNT,
            zeta_min: DEFAULT_ZETA_MIN,
            zeta_max: DEFAULT_ZETA_MAX,
            omega: OmegaConvention::Angular,
            filter_width: DEFAULT_FILTER_WIDTH,
            detectors: DetectorParams::default(),
            cell_size_m: DEFAULT_CELL_SIZE_M,
            alarm_halo_m: DEFAULT_ALARM_HALO_M,
            scoring: ScoringRules::default(),
            track_width_m: DEFAULT_TRACK_WIDTH_M,
            far_unit: FarUnit::default(),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse '{value}'")))
}

impl PipelineConfig {
    /// Sets one option by its flag name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let d = &mut self.detectors;
        match key.trim() {
            "preset" => self.preset = Some(v.to_string()),
            "lane" => self.lane = Some(v.into()),
            "truth" => self.truth = Some(v.into()),
            "dict" => self.dict = Some(v.into()),
            "out-dir" => self.out_dir = v.into(),
            "seed" => self.seed = Some(parse_value(key, v)?),
            "methods" => {
                self.methods = v
                    .split(',')
                    .map(|m| m.trim().parse::<Method>())
                    .collect::<Result<_>>()?;
            }
            "freq-count" => self.freq_count = parse_value(key, v)?,
            "freq-min" => self.freq_min_hz = parse_value(key, v)?,
            "freq-max" => self.freq_max_hz = parse_value(key, v)?,
            "count" => self.atom_count = parse_value(key, v)?,
            "zeta-min" => self.zeta_min = parse_value(key, v)?,
            "zeta-max" => self.zeta_max = parse_value(key, v)?,
            "omega-convention" => self.omega = v.parse()?,
            "filter-width" => self.filter_width = parse_value(key, v)?,
            "lambda" => d.wace.lambda = parse_value(key, v)?,
            "init-n" => d.wace.init_window = parse_value(key, v)?,
            "bg-threshold" => d.wace.background_threshold = parse_value(key, v)?,
            "update-mode" => d.wace.update_mode = v.parse::<UpdateMode>()?,
            "offset" => d.jomp_offset = parse_value(key, v)?,
            "sparsity" => d.sparsity = parse_value(key, v)?,
            "ridge" => {
                d.ridge = parse_value(key, v)?;
                d.wace.ridge = d.ridge;
            }
            "cell" => self.cell_size_m = parse_value(key, v)?,
            "halo" => self.alarm_halo_m = parse_value(key, v)?,
            "hit-halo" => self.scoring.hit_halo_m = parse_value(key, v)?,
            "max-depth" => self.scoring.max_depth_in = parse_value(key, v)?,
            "purpose" => {
                self.scoring.purpose_filter = match v {
                    "" | "any" => None,
                    p => Some(p.parse::<Purpose>()?),
                }
            }
            "track-width" => self.track_width_m = parse_value(key, v)?,
            "far-unit" => self.far_unit = v.parse()?,
            other => return Err(Error::invalid(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, source: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(source, i as u64 + 1, "expected key = value"))?;
            self.set(key, value)
                .map_err(|e| Error::parse(source, i as u64 + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Applies the seed override from the environment, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = Some(parse_value(SEED_ENV, &v)?);
        }
        Ok(())
    }

    /// The effective configuration in config-file form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        if let Some(p) = path(&self.lane) {
            put("lane", p);
        }
        if let Some(p) = path(&self.truth) {
            put("truth", p);
        }
        if let Some(p) = path(&self.dict) {
            put("dict", p);
        }
        put("out-dir", self.out_dir.display().to_string());
        if let Some(seed) = self.seed {
            put("seed", seed.to_string());
        }
        put(
            "methods",
            self.methods
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("freq-count", self.freq_count.to_string());
        put("freq-min", self.freq_min_hz.to_string());
        put("freq-max", self.freq_max_hz.to_string());
        put("count", self.atom_count.to_string());
        put("zeta-min", self.zeta_min.to_string());
        put("zeta-max", self.zeta_max.to_string());
        put("omega-convention", self.omega.to_string());
        put("filter-width", self.filter_width.to_string());
        let d = &self.detectors;
        put("lambda", d.wace.lambda.to_string());
        put("init-n", d.wace.init_window.to_string());
        put("bg-threshold", d.wace.background_threshold.to_string());
        put("update-mode", d.wace.update_mode.to_string());
        put("offset", d.jomp_offset.to_string());
        put("sparsity", d.sparsity.to_string());
        put("ridge", d.ridge.to_string());
        put("cell", self.cell_size_m.to_string());
        put("halo", self.alarm_halo_m.to_string());
        put("hit-halo", self.scoring.hit_halo_m.to_string());
        put("max-depth", self.scoring.max_depth_in.to_string());
        put(
            "purpose",
            self.scoring
                .purpose_filter
                .map_or_else(|| "any".into(), |p| p.to_string()),
        );
        put("track-width", self.track_width_m.to_string());
        put("far-unit", self.far_unit.to_string());
        s
    }

    /// Checks ranges and that referenced inputs exist.
    pub fn validate(&self) -> Result<()> {
        let exists = |what: &str, p: &Option<PathBuf>| match p {
            Some(p) if !p.is_file() => Err(Error::invalid(format!(
                "{what} file '{}' does not exist",
                p.display()
            ))),
            _ => Ok(()),
        };
        if self.preset.is_none() && (self.lane.is_none() || self.truth.is_none()) {
            return Err(Error::invalid(
                "either a preset or both lane and truth files are required",
            ));
        }
        if self.preset.is_some() && (self.lane.is_some() || self.truth.is_some()) {
            return Err(Error::invalid(
                "a preset cannot be combined with lane or truth files",
            ));
        }
        exists("lane", &self.lane)?;
        exists("truth", &self.truth)?;
        exists("dictionary", &self.dict)?;
        if self.methods.is_empty() {
            return Err(Error::invalid("no detectors selected"));
        }
        if self.freq_count == 0 || self.atom_count == 0 {
            return Err(Error::invalid("frequency and atom counts must be positive"));
        }
        let positive = [
            ("cell", self.cell_size_m),
            ("track-width", self.track_width_m),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{k} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("halo", self.alarm_halo_m),
            ("hit-halo", self.scoring.hit_halo_m),
            ("max-depth", self.scoring.max_depth_in),
            ("ridge", self.detectors.ridge),
        ];
        for (k, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{k} must be >= 0, got {v}")));
            }
        }
        sine_filter_taps(self.filter_width)?;
        if self.methods.contains(&Method::Wace) {
            self.detectors.wace.validate(2 * self.freq_count)?;
        }
        if self.methods.contains(&Method::Jomp)
            && (self.detectors.jomp_offset == 0 || self.detectors.sparsity == 0)
        {
            return Err(Error::invalid("JOMP offset and sparsity must be positive"));
        }
        Ok(())
    }

    pub fn operating_freqs(&self) -> Result<Vec<f64>> {
        log_spaced(self.freq_count, self.freq_min_hz, self.freq_max_hz)
    }

    /// Loads the dictionary file, or builds one from the dictionary parameters.
    pub fn dictionary(&self) -> Result<Dictionary> {
        let freqs = self.operating_freqs()?;
        match &self.dict {
            Some(p) => io::read_dictionary_csv(p, &freqs),
            None => build_dictionary(
                &freqs,
                self.atom_count,
                self.zeta_min,
                self.zeta_max,
                self.omega,
            ),
        }
    }
}

/// Filters a lane with the sine kernel of the given width.
pub fn preprocess(lane: &RawLane, filter_width: usize) -> Result<RawLane> {
    downtrack_filter(lane, &sine_filter_taps(filter_width)?)
}

/// Runs one detector on a filtered lane and returns the positions the
/// confidences belong to.
pub fn run_detector(
    method: Method,
    filtered: &RawLane,
    dict: &Dictionary,
    params: &DetectorParams,
) -> Result<(Vec<Position>, ConfidenceTrace)> {
    if method == Method::Energy {
        return Ok((filtered.positions(), detect_energy(filtered)?));
    }
    let fl = lane_features(filtered);
    if fl.is_empty() {
        return Err(Error::invalid("lane has no usable samples"));
    }
    let trace = match method {
        Method::AceGlobal => detect_global_ace(&fl.features, dict, params.ridge)?,
        Method::Wace => detect_wace(&fl.features, dict, &params.wace)?,
        Method::Jomp => detect_jomp(&fl.features, dict, params.jomp_offset, params.sparsity)?,
        Method::Energy => unreachable!(),
    };
    Ok((fl.positions, trace))
}

/// Rasterizes a confidence trace and extracts its alarms.
pub fn alarms_from_trace(
    positions: &[Position],
    confidences: &[f64],
    cell_size_m: f64,
    halo_m: f64,
) -> Result<(ConfidenceGrid, Vec<Alarm>)> {
    let grid = rasterize(positions, confidences, cell_size_m)?;
    let alarms = extract_alarms(&grid, halo_m)?;
    Ok((grid, alarms))
}

/// Lane area used for FAR, or 1 when counting false alarms.
pub fn far_area(positions: &[Position], track_width_m: f64, unit: FarUnit) -> Result<f64> {
    match unit {
        FarUnit::PerSquareMeter => lane_area(positions, track_width_m),
        FarUnit::Count => Ok(1.0),
    }
}

/// Labels alarms against the truth and sweeps the ROC.
pub fn score(
    alarms: &[Alarm],
    truth: &[GroundTruthEntry],
    rules: &ScoringRules,
    area: f64,
) -> Result<(MatchOutcome, RocCurve)> {
    let outcome = match_alarms(alarms, truth, rules)?;
    let curve = roc(&outcome.alarms, outcome.scorable_targets, area)?;
    Ok((outcome, curve))
}

/// Alarms in extraction order, all marked unscored.
pub fn unscored(alarms: &[Alarm]) -> Vec<LabeledAlarm> {
    alarms
        .iter()
        .map(|a| LabeledAlarm {
            alarm: *a,
            label: AlarmLabel::Unscored,
            target: None,
        })
        .collect()
}

/// One artifact with its content hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub path: PathBuf,
    pub sha256: String,
}

/// Artifacts of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub out_dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    fn add(&mut self, file: &Path) -> Result<()> {
        let sha256 = io::sha256_file(file)?;
        let path = file
            .strip_prefix(&self.out_dir)
            .unwrap_or(file)
            .to_path_buf();
        self.entries.push(ManifestEntry { path, sha256 });
        Ok(())
    }

    /// Entries whose file name has the given extension.
    pub fn with_extension<'a>(
        &'a self,
        ext: &'a str,
    ) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries
            .iter()
            .filter(move |e| e.path.extension().is_some_and(|x| x == ext))
    }

    /// `sha256sum`-compatible listing, sorted by path.
    pub fn to_text(&self) -> String {
        let mut entries: Vec<&ManifestEntry> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        entries
            .iter()
            .map(|e| format!("{}  {}\n", e.sha256, e.path.display()))
            .collect()
    }
}

/// Results of one detector in a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub method: Method,
    pub outcome: MatchOutcome,
    pub roc: RocCurve,
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub manifest: Manifest,
    pub results: Vec<MethodResult>,
    pub report: Report,
}

pub const MANIFEST_FILE: &str = "manifest.txt";

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs simulate (for presets), preprocess, detect, alarms and score, and
/// writes every artifact plus a hashed manifest into `cfg.out_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutput> {
    stage("config", cfg.validate())?;
    let out = cfg.out_dir.clone();
    stage(
        "config",
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e)),
    )?;
    let mut manifest = Manifest {
        out_dir: out.clone(),
        entries: Vec::new(),
    };

    // The output location is left out so that relocated runs hash identically.
    let echo: String = cfg
        .to_text()
        .lines()
        .filter(|l| !l.starts_with("out-dir"))
        .map(|l| format!("{l}\n"))
        .collect();
    let config_path = out.join("config.txt");
    stage(
        "config",
        std::fs::write(&config_path, echo).map_err(|e| Error::io(&config_path, e)),
    )?;
    stage("config", manifest.add(&config_path))?;

    let dict = stage("dict", cfg.dictionary())?;
    let dict_path = out.join("dict.csv");
    let features_path = stage("dict", io::write_dictionary_csv(&dict_path, &dict))?;
    stage(
        "dict",
        manifest
            .add(&dict_path)
            .and_then(|_| manifest.add(&features_path)),
    )?;

    let (lane, truth) = match &cfg.preset {
        Some(name) => {
            let (lane, truth) = stage("simulate", simulate(name, cfg.seed, &dict))?;
            let lane_path = out.join("lane.csv");
            let truth_path = out.join("truth.csv");
            stage("simulate", io::write_lane_csv(&lane_path, &lane))?;
            stage("simulate", io::write_truth_csv(&truth_path, &truth))?;
            stage(
                "simulate",
                manifest
                    .add(&lane_path)
                    .and_then(|_| manifest.add(&truth_path)),
            )?;
            (lane, truth)
        }
        None => {
            let lane = stage(
                "preprocess",
                io::read_lane_csv(cfg.lane.as_deref().unwrap(), &dict.operating_freqs),
            )?;
            let truth = stage("score", io::read_truth_csv(cfg.truth.as_deref().unwrap()))?;
            (lane, truth)
        }
    };

    let filtered = stage("preprocess", preprocess(&lane, cfg.filter_width))?;
    let filtered_path = out.join("filtered.csv");
    stage("preprocess", io::write_lane_csv(&filtered_path, &filtered))?;
    stage("preprocess", manifest.add(&filtered_path))?;

    let traces = stage(
        "detect",
        cfg.methods
            .par_iter()
            .map(|&m| run_detector(m, &filtered, &dict, &cfg.detectors))
            .collect::<Result<Vec<_>>>(),
    )?;

    let mut results = Vec::with_capacity(cfg.methods.len());
    let mut roc_paths = Vec::with_capacity(cfg.methods.len());
    for (&method, (positions, trace)) in cfg.methods.iter().zip(&traces) {
        let m = method.name();
        let conf_path = out.join(format!("conf_{m}.csv"));
        stage(
            "detect",
            io::write_confidence_csv(&conf_path, positions, &trace.confidences),
        )?;
        stage("detect", manifest.add(&conf_path))?;

        let (grid, alarms) = stage(
            "alarms",
            alarms_from_trace(
                positions,
                &trace.confidences,
                cfg.cell_size_m,
                cfg.alarm_halo_m,
            ),
        )?;
        let alarms_path = out.join(format!("alarms_{m}.csv"));
        let map_path = out.join(format!("map_{m}.pgm"));
        stage(
            "alarms",
            io::write_alarms_csv(&alarms_path, &unscored(&alarms)),
        )?;
        let (sidecar, grid_csv) = stage("alarms", io::write_grid_pgm(&map_path, &grid))?;
        for p in [&alarms_path, &map_path, &sidecar, &grid_csv] {
            stage("alarms", manifest.add(p))?;
        }

        let area = stage(
            "score",
            far_area(positions, cfg.track_width_m, cfg.far_unit),
        )?;
        let (outcome, curve) = stage("score", score(&alarms, &truth, &cfg.scoring, area))?;
        let scored_path = out.join(format!("scored_{m}.csv"));
        let roc_path = out.join(format!("roc_{m}.csv"));
        stage("score", io::write_alarms_csv(&scored_path, &outcome.alarms))?;
        stage("score", io::write_roc_csv(&roc_path, &curve))?;
        stage(
            "score",
            manifest
                .add(&scored_path)
                .and_then(|_| manifest.add(&roc_path)),
        )?;
        log::info!(
            "{m}: {} alarms, {} hits of {} scorable targets",
            outcome.alarms.len(),
            outcome.count(AlarmLabel::Hit),
            outcome.scorable_targets
        );
        roc_paths.push(roc_path);
        results.push(MethodResult {
            method,
            outcome,
            roc: curve,
        });
    }

    let report = stage("report", compare_report(&roc_paths))?;
    let report_txt = out.join("report.txt");
    let report_csv = out.join("report.csv");
    stage(
        "report",
        std::fs::write(&report_txt, report.to_text()).map_err(|e| Error::io(&report_txt, e)),
    )?;
    stage(
        "report",
        std::fs::write(&report_csv, report.to_csv()).map_err(|e| Error::io(&report_csv, e)),
    )?;
    stage(
        "report",
        manifest
            .add(&report_txt)
            .and_then(|_| manifest.add(&report_csv)),
    )?;

    let manifest_path = out.join(MANIFEST_FILE);
    stage(
        "manifest",
        std::fs::write(&manifest_path, manifest.to_text())
            .map_err(|e| Error::io(&manifest_path, e)),
    )?;
    Ok(RunOutput {
        manifest,
        results,
        report,
    })
}

/// Generates a preset lane, with `seed` replacing the preset's own seed.
pub fn simulate(
    preset: &str,
    seed: Option<u64>,
    dict: &Dictionary,
) -> Result<(RawLane, Vec<GroundTruthEntry>)> {
    let mut scenario = lane_sim::preset(preset)?;
    if let Some(seed) = seed {
        scenario = scenario.with_seed(seed);
    }
    lane_sim::generate_lane(&scenario, dict)
}

/// One detector's line in a comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub detector: String,
    /// Area under the ROC over the common FAR range, divided by its width.
    pub auc: f64,
    /// Pd at each point of [`REPORT_FAR_GRID`].
    pub pd_at_far: Vec<f64>,
    pub final_pd: f64,
}

/// Side-by-side comparison of ROC curves.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// Upper end of the FAR range every curve reaches.
    pub far_range: f64,
    /// Sorted by AUC, best first.
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn row(&self, detector: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.detector == detector)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("common FAR range: [0, {}]\n", self.far_range);
        let _ = write!(s, "{:<12} {:>8} {:>8}", "detector", "auc", "final_pd");
        for f in REPORT_FAR_GRID {
            let _ = write!(s, " {:>9}", format!("pd@{f}"));
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:<12} {:>8.4} {:>8.4}", r.detector, r.auc, r.final_pd);
            for pd in &r.pd_at_far {
                let _ = write!(s, " {pd:>9.4}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("detector,auc,far_range,final_pd");
        for f in REPORT_FAR_GRID {
            let _ = write!(s, ",pd_at_far_{f}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{}",
                r.detector, r.auc, self.far_range, r.final_pd
            );
            for pd in &r.pd_at_far {
                let _ = write!(s, ",{pd}");
            }
            s.push('\n');
        }
        s
    }
}

/// Normalized area under `curve` over `[0, far_max]`, starting from (0, 0).
///
/// With `far_max == 0` the area degenerates to the Pd reached at zero FAR.
pub fn normalized_auc(curve: &RocCurve, far_max: f64) -> f64 {
    if far_max <= 0.0 {
        return curve.pd_at_far(0.0);
    }
    let mut area = 0.0;
    let (mut f0, mut p0) = (0.0, 0.0);
    for p in &curve.points {
        if p.far > far_max {
            // Linear interpolation up to the end of the common range.
            let t = (far_max - f0) / (p.far - f0);
            area += (far_max - f0) * (p0 + 0.5 * t * (p.pd - p0));
            return area / far_max;
        }
        area += (p.far - f0) * 0.5 * (p0 + p.pd);
        (f0, p0) = (p.far, p.pd);
    }
    area += (far_max - f0) * p0;
    area / far_max
}

/// Detector name of a ROC file: its stem without a leading `roc_`.
fn detector_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    stem.strip_prefix("roc_")
        .map_or(stem.clone(), str::to_string)
}

/// Compares ROC files by normalized AUC over their common FAR range and by Pd
/// on a fixed FAR grid.
pub fn compare_report<P: AsRef<Path>>(roc_paths: &[P]) -> Result<Report> {
    if roc_paths.is_empty() {
        return Err(Error::invalid("no ROC files to compare"));
    }
    let mut curves = BTreeMap::new();
    for p in roc_paths {
        let p = p.as_ref();
        let mut name = detector_name(p);
        while curves.contains_key(&name) {
            name.push('\'');
        }
        curves.insert(name, io::read_roc_csv(p)?);
    }
    let far_range = curves
        .values()
        .map(|c| c.points.iter().map(|p| p.far).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    let mut rows: Vec<ReportRow> = curves
        .into_iter()
        .map(|(detector, c)| ReportRow {
            auc: normalized_auc(&c, far_range),
            pd_at_far: REPORT_FAR_GRID.iter().map(|&f| c.pd_at_far(f)).collect(),
            final_pd: c.final_pd(),
            detector,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.auc
            .total_cmp(&a.auc)
            .then_with(|| a.detector.cmp(&b.detector))
    });
    Ok(Report { far_range, rows })
}
