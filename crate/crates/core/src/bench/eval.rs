use nalgebra::{Point2, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::align::{align_to_clicks, DEFAULT_ALIGN_WINDOW_US};
use super::stats::mean_std;
use super::BenchError;
use crate::calibration::{apply_calibration, fit_personal_calibration, CalibrationProfile};
use crate::estimators::{EstimatorInput, GazeEstimate, GazeEstimator};
use crate::geom::{angular_error, gaze_from_target, screen_px_to_camera_3d, GazeSample, ScreenModel};
use crate::headpose::{estimate_head_pose, FaceModel3D, PoseConfig};
use crate::normalization::{compute_normalization, NormalizationParams};
use crate::session::SessionLog;

/// How calibration and test samples are drawn from the usable samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// First `n_cal` samples calibrate, last `n_test` test.
    #[default]
    Sequential,
    /// Same rule applied after a seeded shuffle.
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub window_us: i64,
    pub model: FaceModel3D<f64>,
    pub pose: PoseConfig<f64>,
    /// When set, each estimator input carries its normalized frame.
    pub normalization: Option<NormalizationParams<f64>>,
    pub split: SplitMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            window_us: DEFAULT_ALIGN_WINDOW_US,
            model: FaceModel3D::default(),
            pose: PoseConfig::default(),
            normalization: Some(NormalizationParams::default()),
            split: SplitMode::Sequential,
        }
    }
}

/// One click-confirmed sample with its estimate, ready for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub timestamp_us: i64,
    pub click_px: Point2<f64>,
    /// Face centre from the estimated head pose; origin of both rays.
    pub face_center: Vector3<f64>,
    pub truth: GazeSample<f64>,
    pub estimate: GazeEstimate<f64>,
    /// On-screen point of the estimate (binocular: midpoint of both eyes).
    pub estimate_px: Point2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSession {
    pub estimator: String,
    pub participant_id: String,
    pub condition_tag: String,
    pub distance_mm: f64,
    pub screen: ScreenModel<f64>,
    pub samples: Vec<PreparedSample>,
    pub total_clicks: usize,
    /// Clicks without a landmark frame in the alignment window.
    pub dropped: usize,
    /// Aligned clicks where pose, estimator or screen projection failed.
    pub skipped: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub estimator: String,
    pub participant_id: String,
    pub condition_tag: String,
    pub distance_mm: f64,
    pub n_calibration: usize,
    pub n_test: usize,
    /// Per test sample, in time order of the test set.
    pub errors_deg: Vec<f64>,
    pub mean_deg: f64,
    /// Sample standard deviation (n − 1); zero for a single sample.
    pub std_deg: f64,
    pub dropped: usize,
    pub skipped: usize,
    /// Test samples outside the calibration region.
    pub extrapolated: usize,
}

/// Aligns clicks, runs pose estimation and the estimator on every aligned frame.
pub fn prepare_session(log: &SessionLog<f64>, estimator: &dyn GazeEstimator<f64>, cfg: &EvalConfig) -> PreparedSession {
    let md = &log.metadata;
    let cam = md.intrinsics;
    let screen = md.screen;
    let alignment = align_to_clicks(log, cfg.window_us);
    let mut out = PreparedSession {
        estimator: estimator.name().to_string(),
        participant_id: md.participant_id.clone(),
        condition_tag: md.condition_tag.clone(),
        distance_mm: md.distance_mm,
        screen,
        samples: vec![],
        total_clicks: alignment.total,
        dropped: alignment.dropped,
        skipped: 0,
        diagnostics: alignment.diagnostics,
    };
    for m in &alignment.matched {
        let ts = m.click.timestamp_us;
        let outcome = (|| -> Result<PreparedSample, String> {
            let pose = estimate_head_pose(m.landmarks, &cfg.model, &cam, &cfg.pose).map_err(|e| e.to_string())?;
            let mut input = EstimatorInput::new(m.landmarks.clone(), pose.transform, &cfg.model);
            if let Some(params) = &cfg.normalization {
                input.normalized = compute_normalization(&input.face_center, &input.head_pose, &cam, params).ok();
            }
            let estimate = estimator.estimate(&input).map_err(|e| e.to_string())?;
            let estimate_px = estimate.screen_point(&screen).map_err(|e| e.to_string())?.value;
            let target = screen_px_to_camera_3d(&m.click.target_px, &screen).value;
            let truth = gaze_from_target(&input.face_center, &target, ts).map_err(|e| e.to_string())?;
            Ok(PreparedSample { timestamp_us: ts, click_px: m.click.target_px, face_center: input.face_center, truth, estimate, estimate_px })
        })();
        match outcome {
            Ok(s) => out.samples.push(s),
            Err(reason) => {
                out.skipped += 1;
                out.diagnostics.push(format!("click at {ts} us skipped: {reason}"));
            }
        }
    }
    out
}

fn geom_err(e: crate::geom::GeomError) -> BenchError {
    BenchError::Estimator(e.into())
}

fn raw_error(s: &PreparedSample, screen: &ScreenModel<f64>) -> Result<f64, BenchError> {
    if let GazeEstimate::Monocular(g) = &s.estimate {
        if g.origin == s.face_center {
            return angular_error(g.direction(), s.truth.direction()).map_err(geom_err);
        }
    }
    lifted_error(s, &s.estimate_px, screen)
}

/// Error of the ray from the face centre through an on-screen point.
fn lifted_error(s: &PreparedSample, px: &Point2<f64>, screen: &ScreenModel<f64>) -> Result<f64, BenchError> {
    let target = screen_px_to_camera_3d(px, screen).value;
    let g = gaze_from_target(&s.face_center, &target, s.timestamp_us).map_err(geom_err)?;
    angular_error(g.direction(), s.truth.direction()).map_err(geom_err)
}

fn sample_order(n: usize, split: SplitMode) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let SplitMode::Shuffled(seed) = split {
        order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    }
    order
}

/// Sample indices of the calibration and test sets.
fn split_indices(prep: &PreparedSession, n_cal: usize, n_test: usize, split: SplitMode) -> Result<(Vec<usize>, Vec<usize>), BenchError> {
    let available = prep.samples.len();
    if n_cal + n_test > available || n_test == 0 {
        return Err(BenchError::InsufficientSamples { required: n_cal + n_test.max(1), n_cal, n_test, available });
    }
    let order = sample_order(available, split);
    Ok((order[..n_cal].to_vec(), order[available - n_test..].to_vec()))
}

/// (estimated, clicked) pixel pairs of the calibration set.
pub fn calibration_pairs(
    prep: &PreparedSession,
    n_cal: usize,
    split: SplitMode,
) -> Result<Vec<(Point2<f64>, Point2<f64>)>, BenchError> {
    let available = prep.samples.len();
    if n_cal == 0 || n_cal > available {
        return Err(BenchError::InsufficientSamples { required: n_cal.max(1), n_cal, n_test: 0, available });
    }
    Ok(sample_order(available, split)[..n_cal].iter().map(|&i| (prep.samples[i].estimate_px, prep.samples[i].click_px)).collect())
}

fn score_indices(
    prep: &PreparedSession,
    profile: Option<&CalibrationProfile<f64>>,
    n_calibration: usize,
    test: &[usize],
) -> Result<EvalResult, BenchError> {
    let mut extrapolated = 0;
    let errors_deg = test
        .iter()
        .map(|&i| {
            let s = &prep.samples[i];
            match profile {
                None => raw_error(s, &prep.screen),
                Some(p) => {
                    let c = apply_calibration(p, &s.estimate_px);
                    extrapolated += c.extrapolated as usize;
                    lifted_error(s, &c.point, &prep.screen)
                }
            }
        })
        .collect::<Result<Vec<f64>, BenchError>>()?;
    let (mean_deg, std_deg) = mean_std(&errors_deg);
    Ok(EvalResult {
        estimator: prep.estimator.clone(),
        participant_id: prep.participant_id.clone(),
        condition_tag: prep.condition_tag.clone(),
        distance_mm: prep.distance_mm,
        n_calibration,
        n_test: test.len(),
        errors_deg,
        mean_deg,
        std_deg,
        dropped: prep.dropped,
        skipped: prep.skipped,
        extrapolated,
    })
}

/// Scores a prepared session with `n_cal` calibration and `n_test` test samples.
/// `n_cal = 0` scores the raw estimates.
pub fn score_session(prep: &PreparedSession, n_cal: usize, n_test: usize, split: SplitMode) -> Result<EvalResult, BenchError> {
    let (cal, test) = split_indices(prep, n_cal, n_test, split)?;
    if n_cal == 0 {
        return score_indices(prep, None, 0, &test);
    }
    let pairs: Vec<_> = cal.iter().map(|&i| (prep.samples[i].estimate_px, prep.samples[i].click_px)).collect();
    let profile = fit_personal_calibration(&pairs, &prep.screen.geometry, 0)?;
    score_indices(prep, Some(&profile), n_cal, &test)
}

/// Scores the last `n_test` samples through a profile fitted elsewhere.
pub fn score_with_profile(prep: &PreparedSession, profile: &CalibrationProfile<f64>, n_test: usize) -> Result<EvalResult, BenchError> {
    let (_, test) = split_indices(prep, 0, n_test, SplitMode::Sequential)?;
    score_indices(prep, Some(profile), profile.n_samples, &test)
}

pub fn evaluate_session(
    log: &SessionLog<f64>,
    estimator: &dyn GazeEstimator<f64>,
    split: (usize, usize),
    cfg: &EvalConfig,
) -> Result<EvalResult, BenchError> {
    log.validate()?;
    score_session(&prepare_session(log, estimator, cfg), split.0, split.1, cfg.split)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean of per-session means; std across sessions.
    #[default]
    PerSession,
    /// All samples pooled.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean_deg: f64,
    pub std_deg: f64,
    pub n_sessions: usize,
    pub n_samples: usize,
}

pub fn aggregate(results: &[EvalResult], mode: Aggregation) -> Aggregate {
    let n_samples = results.iter().map(|r| r.errors_deg.len()).sum();
    let (mean_deg, std_deg) = match mode {
        Aggregation::PerSession => mean_std(&results.iter().map(|r| r.mean_deg).collect::<Vec<_>>()),
        Aggregation::Pooled => mean_std(&results.iter().flat_map(|r| r.errors_deg.iter().copied()).collect::<Vec<_>>()),
    };
    Aggregate { mean_deg, std_deg, n_sessions: results.len(), n_samples }
}
