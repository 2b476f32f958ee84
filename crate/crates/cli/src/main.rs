//! `gazekit` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gazekit::bench::{
    calibration_pairs, prepare_session, report, score_session, score_with_profile, sweep_calibration_samples, sweep_distance,
    BenchError, EstimatorSpec, EvalConfig, EvalResult, ReportFormat, SplitMode,
};
use gazekit::calibration::{calibrate_screen_from_mirrors, fit_personal_calibration, CalibrationError, MirrorConfig};
use gazekit::estimators::{EstimatorError, GazeEstimator, DEFAULT_WINDOW_US};
use gazekit::headpose::FaceModel3D;
use gazekit::io::{self, IoError, SweepKind};
use gazekit::session::SessionLog;
use gazekit::synthlab::{default_camera, default_screen, generate_session, SceneConfig, SynthError};

#[derive(Parser, Debug)]
#[command(name = "gazekit", version, about = "Simulate, calibrate and benchmark webcam gaze estimation")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Overrides the seed of the scene or sweep config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scene config (simulate) or sweep spec (sweep); key = value or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Click-to-frame alignment window in microseconds.
    #[arg(long, global = true, default_value_t = gazekit::bench::DEFAULT_ALIGN_WINDOW_US)]
    window_us: i64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic session and its ground truth.
    Simulate {
        /// Screen model JSON; the built-in 55" display otherwise.
        #[arg(long)]
        screen: Option<PathBuf>,
        #[arg(long)]
        face_model: Option<PathBuf>,
    },
    /// Recover the screen pose from a mirror dataset.
    CalibrateScreen { dataset: PathBuf },
    /// Fit a personal calibration profile from the first clicks of a session.
    CalibratePerson {
        session: PathBuf,
        #[arg(long, default_value = "geometric")]
        estimator: String,
        #[arg(long)]
        n_cal: usize,
        /// Draw calibration samples after a seeded shuffle instead of from the start.
        #[arg(long)]
        shuffle: Option<u64>,
        #[arg(long)]
        face_model: Option<PathBuf>,
    },
    /// Score one estimator on a session.
    Evaluate {
        session: PathBuf,
        #[arg(long, default_value = "geometric")]
        estimator: String,
        /// Profile JSON applied to the test samples.
        #[arg(long, conflicts_with = "n_cal")]
        profile: Option<PathBuf>,
        /// Fit a profile from the first N samples of this session.
        #[arg(long, default_value_t = 0)]
        n_cal: usize,
        #[arg(long, default_value_t = 20)]
        n_test: usize,
        #[arg(long)]
        face_model: Option<PathBuf>,
    },
    /// Run a distance or calibration-count sweep.
    Sweep {
        /// Also write gnuplot data files, one per estimator.
        #[arg(long)]
        gnuplot: bool,
    },
}

/// Failure class, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Data,
    Numerical,
}

fn classify_calibration(e: &CalibrationError) -> Class {
    match e {
        CalibrationError::InsufficientData { .. } | CalibrationError::NonFinite | CalibrationError::LengthMismatch { .. } => Class::Data,
        _ => Class::Numerical,
    }
}

fn classify_estimator(e: &EstimatorError) -> Class {
    match e {
        EstimatorError::NoIntersection { .. } | EstimatorError::BothEyesFailed | EstimatorError::Geom(_) => Class::Numerical,
        _ => Class::Data,
    }
}

fn classify(err: &anyhow::Error) -> Class {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CalibrationError>() {
            return classify_calibration(e);
        }
        if let Some(e) = cause.downcast_ref::<EstimatorError>() {
            return classify_estimator(e);
        }
        if let Some(e) = cause.downcast_ref::<BenchError>() {
            return match e {
                BenchError::Calibration(c) => classify_calibration(c),
                BenchError::Estimator(c) => classify_estimator(c),
                BenchError::Synth(SynthError::Geom(_)) => Class::Numerical,
                _ => Class::Data,
            };
        }
        if let Some(SynthError::Geom(_)) = cause.downcast_ref::<SynthError>() {
            return Class::Numerical;
        }
        if cause.downcast_ref::<IoError>().is_some() {
            return Class::Data;
        }
    }
    Class::Data
}

fn out_dir(global: &Global) -> Result<PathBuf> {
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn read(path: &Path) -> Result<String> {
    Ok(io::read_text(path)?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    io::write_text(path, text)?;
    log::info!("wrote {}", path.display());
    println!("{}", path.display());
    Ok(())
}

fn face_model(path: Option<&Path>) -> Result<FaceModel3D<f64>> {
    match path {
        Some(p) => io::parse_face_model(&read(p)?).with_context(|| format!("face model {}", p.display())),
        None => Ok(FaceModel3D::default()),
    }
}

fn load_session(path: &Path) -> Result<SessionLog<f64>> {
    let log = io::parse_session(&read(path)?).with_context(|| format!("session {}", path.display()))?;
    log.validate()?;
    Ok(log)
}

fn estimator(spec: &str, log: &SessionLog<f64>, cfg: &EvalConfig) -> Result<Box<dyn GazeEstimator<f64>>> {
    let spec: EstimatorSpec = spec.parse().map_err(anyhow::Error::msg)?;
    match spec {
        EstimatorSpec::Replay(path) => {
            Ok(Box::new(io::load_replay_estimator(&path, None, DEFAULT_WINDOW_US, Some(log.metadata.screen))?))
        }
        other => Ok(other.build(log, cfg)?),
    }
}

fn simulate(global: &Global, screen: Option<&Path>, face: Option<&Path>) -> Result<()> {
    let mut scene = match &global.config {
        Some(p) => io::parse_scene_config(&read(p)?).with_context(|| format!("scene config {}", p.display()))?,
        None => SceneConfig::default(),
    };
    if let Some(seed) = global.seed {
        scene.seed = seed;
    }
    let screen = match screen {
        Some(p) => io::parse_screen(&read(p)?).with_context(|| format!("screen {}", p.display()))?,
        None => default_screen(),
    };
    let (log, truth) = generate_session(&scene, &face_model(face)?, &default_camera(), &screen)?;
    let dir = out_dir(global)?;
    write(&dir.join("session.txt"), &io::write_session(&log))?;
    let mut header = io::FileHeader::new(io::FORMAT_TRUTH);
    header.push("seed", scene.seed.to_string());
    write(&dir.join("truth.txt"), &io::write_truth(&io::TruthFile { header, samples: truth }))
}

fn calibrate_screen(global: &Global, dataset: &Path) -> Result<()> {
    let d = io::parse_mirror_dataset(&read(dataset)?).with_context(|| format!("mirror dataset {}", dataset.display()))?;
    let cal = calibrate_screen_from_mirrors(&d.observations, &d.camera, &d.geometry, &MirrorConfig::default())?;
    log::info!("rms reprojection {:.4} px over {} mirrors", cal.rms_reprojection_px, cal.mirrors.len());
    write(&out_dir(global)?.join("screen.json"), &io::screen_to_json(&cal.screen))
}

fn eval_config(global: &Global, face: Option<&Path>, split: SplitMode) -> Result<EvalConfig> {
    Ok(EvalConfig { window_us: global.window_us, model: face_model(face)?, split, ..EvalConfig::default() })
}

fn calibrate_person(global: &Global, session: &Path, spec: &str, n_cal: usize, shuffle: Option<u64>, face: Option<&Path>) -> Result<()> {
    let split = shuffle.map_or(SplitMode::Sequential, SplitMode::Shuffled);
    let cfg = eval_config(global, face, split)?;
    let log = load_session(session)?;
    let prep = prepare_session(&log, estimator(spec, &log, &cfg)?.as_ref(), &cfg);
    let pairs = calibration_pairs(&prep, n_cal, split)?;
    let created = log.clicks.get(n_cal.saturating_sub(1)).map_or(0, |c| c.timestamp_us);
    let profile = fit_personal_calibration(&pairs, &log.metadata.screen.geometry, created)?;
    log::info!("in-sample rms {:.3} px over {} samples", profile.rms_residual, profile.n_samples);
    write(&out_dir(global)?.join("profile.json"), &io::profile_to_json(&profile)?)
}

const RESULT_HEADER: &str = "estimator,participant_id,condition,distance_mm,n_calibration,n_test,mean_deg,std_deg,dropped,skipped,extrapolated";

fn result_csv(r: &EvalResult) -> String {
    let q = |s: &str| if s.contains([',', '"', '\n']) { format!("\"{}\"", s.replace('"', "\"\"")) } else { s.to_string() };
    format!(
        "{RESULT_HEADER}\n{},{},{},{},{},{},{},{},{},{},{}\n",
        q(&r.estimator),
        q(&r.participant_id),
        q(&r.condition_tag),
        io::format_float(r.distance_mm),
        r.n_calibration,
        r.n_test,
        io::format_float(r.mean_deg),
        io::format_float(r.std_deg),
        r.dropped,
        r.skipped,
        r.extrapolated
    )
}

fn evaluate(
    global: &Global,
    session: &Path,
    spec: &str,
    profile: Option<&Path>,
    n_cal: usize,
    n_test: usize,
    face: Option<&Path>,
) -> Result<()> {
    let cfg = eval_config(global, face, SplitMode::Sequential)?;
    let log = load_session(session)?;
    let prep = prepare_session(&log, estimator(spec, &log, &cfg)?.as_ref(), &cfg);
    for d in &prep.diagnostics {
        log::warn!("{d}");
    }
    let result = match profile {
        Some(p) => {
            let profile = io::parse_profile(&read(p)?).with_context(|| format!("profile {}", p.display()))?;
            score_with_profile(&prep, &profile, n_test)?
        }
        None => score_session(&prep, n_cal, n_test, SplitMode::Sequential)?,
    };
    let (name, text) = match global.format {
        Format::Csv => ("result.csv", result_csv(&result)),
        Format::Json => ("result.json", serde_json::to_string_pretty(&result)? + "\n"),
    };
    match &global.out {
        Some(_) => write(&out_dir(global)?.join(name), &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(global: &Global, gnuplot: bool) -> Result<()> {
    let Some(path) = &global.config else { bail!(UsageError("sweep needs --config <sweep spec>")) };
    let mut spec = io::parse_sweep_spec(&read(path)?).with_context(|| format!("sweep spec {}", path.display()))?;
    if let Some(seed) = global.seed {
        spec.config.seed = seed;
    }
    spec.config.eval.window_us = global.window_us;
    let rows = match spec.kind {
        SweepKind::Distance => sweep_distance(&spec.distances_mm, spec.n_cal, &spec.config)?,
        SweepKind::CalibrationSamples => sweep_calibration_samples(&spec.counts, &spec.config)?,
    };
    let format = match global.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    for p in report(&rows, format, &out_dir(global)?, gnuplot)? {
        println!("{}", p.display());
    }
    Ok(())
}

#[derive(Debug)]
struct UsageError(&'static str);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0)
    }
}

impl std::error::Error for UsageError {}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Simulate { screen, face_model } => simulate(g, screen.as_deref(), face_model.as_deref()),
        Command::CalibrateScreen { dataset } => calibrate_screen(g, dataset),
        Command::CalibratePerson { session, estimator, n_cal, shuffle, face_model } => {
            calibrate_person(g, session, estimator, *n_cal, *shuffle, face_model.as_deref())
        }
        Command::Evaluate { session, estimator, profile, n_cal, n_test, face_model } => {
            evaluate(g, session, estimator, profile.as_deref(), *n_cal, *n_test, face_model.as_deref())
        }
        Command::Sweep { gnuplot } => sweep(g, *gnuplot),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                return ExitCode::from(1);
            }
            match classify(&e) {
                Class::Data => ExitCode::from(2),
                Class::Numerical => ExitCode::from(3),
            }
        }
    }
}
