use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::eval::{aggregate, prepare_session, score_session, Aggregation, EvalConfig, EvalResult, PreparedSession};
use super::BenchError;
use crate::estimators::{GazeEstimator, GeometricEstimator, ReplayEstimator, DEFAULT_WINDOW_US};
use crate::geom::{CameraIntrinsics, ScreenModel};
use crate::session::SessionLog;
use crate::synthlab::{default_camera, default_screen, generate_session, SceneConfig};

/// Calibration-sample counts of the reference protocol.
pub const CALIBRATION_LADDER: [usize; 14] = [0, 1, 2, 3, 4, 5, 7, 10, 15, 20, 30, 40, 50, 60];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EstimatorSpec {
    Geometric,
    /// Replay of an estimate stream recorded inside the session.
    Stream(String),
    /// Replay of an external estimate file.
    Replay(PathBuf),
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Geometric => f.write_str("geometric"),
            Self::Stream(id) => write!(f, "stream:{id}"),
            Self::Replay(p) => write!(f, "replay:{}", p.display()),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "geometric" => Ok(Self::Geometric),
            Some(("stream", id)) if !id.is_empty() => Ok(Self::Stream(id.to_string())),
            Some(("replay", path)) if !path.is_empty() => Ok(Self::Replay(PathBuf::from(path))),
            _ => Err(format!("unknown estimator `{s}` (expected geometric, stream:<id> or replay:<path>)")),
        }
    }
}

impl EstimatorSpec {
    /// Builds the estimator for a session; external replay files are loaded by the caller.
    pub fn build(&self, log: &SessionLog<f64>, cfg: &EvalConfig) -> Result<Box<dyn GazeEstimator<f64>>, BenchError> {
        match self {
            Self::Geometric => Ok(Box::new(GeometricEstimator { model: cfg.model, cam: log.metadata.intrinsics })),
            Self::Stream(id) => {
                let stream = log.stream(id).ok_or_else(|| BenchError::InvalidSweep(format!("session has no stream `{id}`")))?;
                Ok(Box::new(ReplayEstimator::new(stream.records.clone(), Some(id), DEFAULT_WINDOW_US, Some(log.metadata.screen))?))
            }
            Self::Replay(p) => Err(BenchError::InvalidSweep(format!("replay file {} cannot be attached to synthetic sessions", p.display()))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scene: SceneConfig,
    /// Sessions per cell.
    pub trials: usize,
    pub seed: u64,
    pub n_test: usize,
    pub estimators: Vec<EstimatorSpec>,
    pub eval: EvalConfig,
    pub aggregation: Aggregation,
    pub cam: CameraIntrinsics<f64>,
    pub screen: ScreenModel<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            trials: 20,
            seed: 0,
            n_test: 20,
            estimators: vec![EstimatorSpec::Geometric],
            eval: EvalConfig::default(),
            aggregation: Aggregation::PerSession,
            cam: default_camera(),
            screen: default_screen(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep: String,
    pub x: f64,
    pub estimator: String,
    pub condition: String,
    pub mean_deg: f64,
    pub std_deg: f64,
    pub n_sessions: usize,
    pub n_samples: usize,
}

/// Session seed of trial `trial`; shared by every cell of a sweep.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(base);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

/// Order-preserving parallel map over `0..n`.
fn par_map<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(n.max(1));
    let mut slots: Vec<Option<R>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = n.div_ceil(workers).max(1);
        for (w, part) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (k, slot) in part.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + k));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

fn validate(cfg: &SweepConfig) -> Result<(), BenchError> {
    if cfg.trials == 0 || cfg.estimators.is_empty() || cfg.n_test == 0 {
        return Err(BenchError::InvalidSweep("trials, estimators and n_test must be non-empty".into()));
    }
    Ok(())
}

/// Prepared sessions for every trial at one scene, per estimator.
fn prepare_trials(scene: &SceneConfig, cfg: &SweepConfig) -> Result<Vec<Vec<PreparedSession>>, BenchError> {
    par_map(cfg.trials, |t| {
        let scene = SceneConfig { seed: trial_seed(cfg.seed, t), ..scene.clone() };
        let (log, _) = generate_session(&scene, &cfg.eval.model, &cfg.cam, &cfg.screen)?;
        cfg.estimators
            .iter()
            .map(|spec| Ok(prepare_session(&log, spec.build(&log, &cfg.eval)?.as_ref(), &cfg.eval)))
            .collect()
    })
    .into_iter()
    .collect()
}

fn row(sweep: &str, x: f64, spec: &EstimatorSpec, cfg: &SweepConfig, results: &[EvalResult]) -> SweepRow {
    let agg = aggregate(results, cfg.aggregation);
    SweepRow {
        sweep: sweep.into(),
        x,
        estimator: spec.to_string(),
        condition: cfg.scene.condition.as_str().into(),
        mean_deg: agg.mean_deg,
        std_deg: agg.std_deg,
        n_sessions: agg.n_sessions,
        n_samples: agg.n_samples,
    }
}

/// Mean error per distance and estimator with `n_cal` calibration samples.
pub fn sweep_distance(distances_mm: &[f64], n_cal: usize, cfg: &SweepConfig) -> Result<Vec<SweepRow>, BenchError> {
    validate(cfg)?;
    let mut rows = vec![];
    for &d in distances_mm {
        let scene = SceneConfig { distance_mm: d, ..cfg.scene.clone() };
        let prepared = prepare_trials(&scene, cfg)?;
        for (e, spec) in cfg.estimators.iter().enumerate() {
            let results = prepared
                .iter()
                .map(|p| score_session(&p[e], n_cal, cfg.n_test, cfg.eval.split))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row("distance", d, spec, cfg, &results));
        }
    }
    Ok(rows)
}

/// Mean error per calibration-sample count and estimator at the configured scene.
pub fn sweep_calibration_samples(counts: &[usize], cfg: &SweepConfig) -> Result<Vec<SweepRow>, BenchError> {
    validate(cfg)?;
    let max = counts.iter().copied().max().unwrap_or(0);
    if max + cfg.n_test > cfg.scene.n_samples {
        return Err(BenchError::InvalidSweep(format!(
            "{} calibration + {} test samples exceed the session length {}",
            max, cfg.n_test, cfg.scene.n_samples
        )));
    }
    let prepared = prepare_trials(&cfg.scene, cfg)?;
    let mut rows = vec![];
    for &n in counts {
        for (e, spec) in cfg.estimators.iter().enumerate() {
            let results =
                prepared.iter().map(|p| score_session(&p[e], n, cfg.n_test, cfg.eval.split)).collect::<Result<Vec<_>, _>>()?;
            rows.push(row("calibration", n as f64, spec, cfg, &results));
        }
    }
    Ok(rows)
}
