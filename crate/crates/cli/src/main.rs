use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use emi_ace_core::detectors::Method;
use emi_ace_core::io;
use emi_ace_core::pipeline::{self, PipelineConfig};
use emi_ace_core::Error;

/// Landmine detection on wideband EMI lanes with ACE, WACE, JOMP and Energy detectors.
#[derive(Parser)]
#[command(name = "emi-ace", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the relaxation-frequency target dictionary.
    Dict(DictArgs),
    /// Generate a synthetic lane and its ground truth.
    Simulate(SimulateArgs),
    /// Apply the down-track filter to a lane.
    Preprocess(PreprocessArgs),
    /// Compute a confidence trace with one detector.
    Detect(DetectArgs),
    /// Rasterize a confidence trace and extract alarms.
    Alarms(AlarmsArgs),
    /// Label alarms against ground truth and write the ROC.
    Score(ScoreArgs),
    /// Run every stage from a config file and/or flags.
    Run(RunArgs),
    /// Compare ROC files by AUC and Pd at fixed false alarm rates.
    Report(ReportArgs),
}

/// Operating-frequency and dictionary-shape options.
#[derive(Args, Default)]
struct FreqArgs {
    /// Number of operating frequencies.
    #[arg(long)]
    freq_count: Option<usize>,
    /// Lowest operating frequency, Hz.
    #[arg(long)]
    freq_min: Option<f64>,
    /// Highest operating frequency, Hz.
    #[arg(long)]
    freq_max: Option<f64>,
    /// How frequencies map to the model's omega: angular or plain.
    #[arg(long)]
    omega_convention: Option<String>,
}

#[derive(Args)]
struct DictArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    zeta_min: Option<f64>,
    #[arg(long)]
    zeta_max: Option<f64>,
    #[command(flatten)]
    freqs: FreqArgs,
    /// Raw-response CSV; the normalized features go to `<stem>_features.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// lane1..lane6, easy or hard.
    #[arg(long)]
    preset: String,
    /// Overrides EMI_ACE_SEED and the preset's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dictionary CSV supplying target signatures.
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    out_lane: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    filter_width: Option<usize>,
    #[command(flatten)]
    freqs: FreqArgs,
    #[arg(long)]
    out: PathBuf,
}

/// Detector parameters, named as in the config file.
#[derive(Args, Default)]
struct DetectorArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    init_n: Option<usize>,
    #[arg(long)]
    bg_threshold: Option<f64>,
    /// consistent or literal.
    #[arg(long)]
    update_mode: Option<String>,
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long)]
    sparsity: Option<usize>,
    #[arg(long)]
    ridge: Option<f64>,
}

#[derive(Args)]
struct DetectArgs {
    /// ace-global, wace, jomp or energy.
    #[arg(long)]
    method: Method,
    /// Filtered lane CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    dict: Option<PathBuf>,
    #[command(flatten)]
    params: DetectorArgs,
    #[command(flatten)]
    freqs: FreqArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AlarmsArgs {
    /// Confidence CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    halo: Option<f64>,
    #[arg(long)]
    cell: Option<f64>,
    /// Also write the confidence map as PGM with sidecars.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// Scoring options, named as in the config file.
#[derive(Args, Default)]
struct ScoringArgs {
    #[arg(long)]
    hit_halo: Option<f64>,
    #[arg(long)]
    max_depth: Option<f64>,
    /// Score only AT or AP targets.
    #[arg(long)]
    purpose: Option<String>,
    #[arg(long)]
    track_width: Option<f64>,
    /// per-m2 or count.
    #[arg(long)]
    far_unit: Option<String>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    alarms: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Confidence CSV whose positions define the lane area.
    #[arg(long, conflicts_with = "area")]
    conf: Option<PathBuf>,
    /// Lane area in square meters.
    #[arg(long)]
    area: Option<f64>,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Also write the labeled alarms.
    #[arg(long)]
    out_labeled: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// key = value file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    lane: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    dict: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated detectors.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    filter_width: Option<usize>,
    #[arg(long)]
    cell: Option<f64>,
    #[arg(long)]
    halo: Option<f64>,
    #[command(flatten)]
    params: DetectorArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[command(flatten)]
    freqs: FreqArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// ROC CSVs; detector names come from the file stems.
    #[arg(required = true)]
    rocs: Vec<PathBuf>,
    /// Write the table as CSV here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Collects `key = value` settings from optional flags.
#[derive(Default)]
struct Settings(Vec<(&'static str, String)>);

impl Settings {
    fn put<T: ToString>(&mut self, key: &'static str, value: &Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.to_string()));
        }
        self
    }

    fn path(&mut self, key: &'static str, value: &Option<PathBuf>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.display().to_string()));
        }
        self
    }

    fn freqs(&mut self, f: &FreqArgs) -> &mut Self {
        self.put("freq-count", &f.freq_count)
            .put("freq-min", &f.freq_min)
            .put("freq-max", &f.freq_max)
            .put("omega-convention", &f.omega_convention)
    }

    fn detectors(&mut self, d: &DetectorArgs) -> &mut Self {
        self.put("lambda", &d.lambda)
            .put("init-n", &d.init_n)
            .put("bg-threshold", &d.bg_threshold)
            .put("update-mode", &d.update_mode)
            .put("offset", &d.offset)
            .put("sparsity", &d.sparsity)
            .put("ridge", &d.ridge)
    }

    fn scoring(&mut self, s: &ScoringArgs) -> &mut Self {
        self.put("hit-halo", &s.hit_halo)
            .put("max-depth", &s.max_depth)
            .put("purpose", &s.purpose)
            .put("track-width", &s.track_width)
            .put("far-unit", &s.far_unit)
    }

    fn apply(&self, cfg: &mut PipelineConfig) -> emi_ace_core::Result<()> {
        self.0.iter().try_for_each(|(k, v)| cfg.set(k, v))
    }

    /// Defaults, then `EMI_ACE_SEED`, then these settings.
    fn config(&self) -> emi_ace_core::Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_env()?;
        self.apply(&mut cfg)?;
        Ok(cfg)
    }
}

fn in_stage<T>(stage: &'static str, r: emi_ace_core::Result<T>) -> emi_ace_core::Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn require_file(stage: &'static str, what: &str, path: &Path) -> emi_ace_core::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(
            Error::InvalidArgument(format!("{what} file '{}' does not exist", path.display()))
                .in_stage(stage),
        )
    }
}

fn dict(args: &DictArgs) -> emi_ace_core::Result<()> {
    let cfg = in_stage(
        "config",
        Settings::default()
            .put("count", &args.count)
            .put("zeta-min", &args.zeta_min)
            .put("zeta-max", &args.zeta_max)
            .freqs(&args.freqs)
            .config(),
    )?;
    let dict = in_stage("dict", cfg.dictionary())?;
    let features = in_stage("dict", io::write_dictionary_csv(&args.out, &dict))?;
    log::info!(
        "wrote {} atoms to {} and {}",
        dict.len(),
        args.out.display(),
        features.display()
    );
    Ok(())
}

fn simulate(args: &SimulateArgs) -> emi_ace_core::Result<()> {
    let cfg = in_stage(
        "config",
        Settings::default()
            .put("seed", &args.seed)
            .path("dict", &args.dict)
            .config(),
    )?;
    if let Some(p) = &args.dict {
        require_file("config", "dictionary", p)?;
    }
    let dict = in_stage("dict", cfg.dictionary())?;
    let (lane, truth) = in_stage(
        "simulate",
        pipeline::simulate(&args.preset, cfg.seed, &dict),
    )?;
    in_stage("simulate", io::write_lane_csv(&args.out_lane, &lane))?;
    in_stage("simulate", io::write_truth_csv(&args.out_truth, &truth))?;
    log::info!(
        "{}: {} samples, {} objects",
        args.preset,
        lane.len(),
        truth.len()
    );
    Ok(())
}

fn preprocess(args: &PreprocessArgs) -> emi_ace_core::Result<()> {
    let cfg = in_stage(
        "config",
        Settings::default()
            .put("filter-width", &args.filter_width)
            .freqs(&args.freqs)
            .config(),
    )?;
    require_file("config", "lane", &args.input)?;
    let freqs = in_stage("config", cfg.operating_freqs())?;
    let lane = in_stage("preprocess", io::read_lane_csv(&args.input, &freqs))?;
    let filtered = in_stage("preprocess", pipeline::preprocess(&lane, cfg.filter_width))?;
    in_stage("preprocess", io::write_lane_csv(&args.out, &filtered))
}

fn detect(args: &DetectArgs) -> emi_ace_core::Result<()> {
    let cfg = in_stage(
        "config",
        Settings::default()
            .path("dict", &args.dict)
            .detectors(&args.params)
            .freqs(&args.freqs)
            .config(),
    )?;
    require_file("config", "lane", &args.input)?;
    if let Some(p) = &args.dict {
        require_file("config", "dictionary", p)?;
    }
    let dict = in_stage("dict", cfg.dictionary())?;
    let lane = in_stage(
        "detect",
        io::read_lane_csv(&args.input, &dict.operating_freqs),
    )?;
    let (positions, trace) = in_stage(
        "detect",
        pipeline::run_detector(args.method, &lane, &dict, &cfg.detectors),
    )?;
    in_stage(
        "detect",
        io::write_confidence_csv(&args.out, &positions, &trace.confidences),
    )
}

fn alarms(args: &AlarmsArgs) -> emi_ace_core::Result<()> {
    let cfg = in_stage(
        "config",
        Settings::default()
            .put("halo", &args.halo)
            .put("cell", &args.cell)
            .config(),
    )?;
    let (positions, conf) = in_stage("alarms", io::read_confidence_csv(&args.input))?;
    let (grid, alarms) = in_stage(
        "alarms",
        pipeline::alarms_from_trace(&positions, &conf, cfg.cell_size_m, cfg.alarm_halo_m),
    )?;
    in_stage(
        "alarms",
        io::write_alarms_csv(&args.out, &pipeline::unscored(&alarms)),
    )?;
    if let Some(map) = &args.map {
        in_stage("alarms", io::write_grid_pgm(map, &grid))?;
    }
    log::info!("{} alarms", alarms.len());
    Ok(())
}

fn score(args: &ScoreArgs) -> emi_ace_core::Result<()> {
    let cfg = in_stage(
        "config",
        Settings::default().scoring(&args.scoring).config(),
    )?;
    let labeled = in_stage("score", io::read_alarms_csv(&args.alarms))?;
    let truth = in_stage("score", io::read_truth_csv(&args.truth))?;
    let alarms: Vec<_> = labeled.iter().map(|a| a.alarm).collect();
    let area = match (args.area, &args.conf) {
        (Some(a), _) => a,
        (None, Some(conf)) => {
            let (positions, _) = in_stage("score", io::read_confidence_csv(conf))?;
            in_stage(
                "score",
                pipeline::far_area(&positions, cfg.track_width_m, cfg.far_unit),
            )?
        }
        (None, None) => {
            // Without a lane, bound the alarms and the truth.
            let positions: Vec<_> = alarms
                .iter()
                .map(|a| a.position())
                .chain(truth.iter().map(|t| t.position()))
                .collect();
            in_stage(
                "score",
                pipeline::far_area(&positions, cfg.track_width_m, cfg.far_unit),
            )?
        }
    };
    let (outcome, curve) = in_stage(
        "score",
        pipeline::score(&alarms, &truth, &cfg.scoring, area),
    )?;
    in_stage("score", io::write_roc_csv(&args.out, &curve))?;
    if let Some(p) = &args.out_labeled {
        in_stage("score", io::write_alarms_csv(p, &outcome.alarms))?;
    }
    Ok(())
}

fn run(args: &RunArgs) -> emi_ace_core::Result<()> {
    let mut cfg = match &args.config {
        Some(p) => in_stage("config", PipelineConfig::from_file(p))?,
        None => PipelineConfig::default(),
    };
    in_stage("config", cfg.apply_env())?;
    let mut flags = Settings::default();
    flags
        .put("preset", &args.preset)
        .path("lane", &args.lane)
        .path("truth", &args.truth)
        .path("dict", &args.dict)
        .path("out-dir", &args.out_dir)
        .put("seed", &args.seed)
        .put("methods", &args.methods)
        .put("filter-width", &args.filter_width)
        .put("cell", &args.cell)
        .put("halo", &args.halo)
        .detectors(&args.params)
        .scoring(&args.scoring)
        .freqs(&args.freqs);
    in_stage("config", flags.apply(&mut cfg))?;
    let out = pipeline::run_pipeline(&cfg)?;
    print!("{}", out.report.to_text());
    log::info!(
        "{} artifacts listed in {}",
        out.manifest.entries.len(),
        cfg.out_dir.join(pipeline::MANIFEST_FILE).display()
    );
    Ok(())
}

fn report(args: &ReportArgs) -> emi_ace_core::Result<()> {
    let report = in_stage("report", pipeline::compare_report(&args.rocs))?;
    print!("{}", report.to_text());
    if let Some(p) = &args.out {
        std::fs::write(p, report.to_csv()).map_err(|e| {
            Error::Io {
                path: p.clone(),
                source: e,
            }
            .in_stage("report")
        })?;
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Dict(a) => dict(a),
        Command::Simulate(a) => simulate(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Detect(a) => detect(a),
        Command::Alarms(a) => alarms(a),
        Command::Score(a) => score(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
