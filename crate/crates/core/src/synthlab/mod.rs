//! Synthetic recording lab: seeded sessions with exact ground truth, and
//! mirror-calibration scenes.
//!
//! Randomness comes from ChaCha20 seeded with `SceneConfig::seed`; sample `i`
//! draws from stream `i` and session-level quantities from stream `u64::MAX`,
//! so every sample is reproducible independently of evaluation order.

mod mirror;
mod scene;

pub use mirror::{checker_pattern, mirror_observations, observe_pattern, reflect_scene, standard_mirrors, ReflectedScreen};
pub use scene::{generate_session, target_region, visual_angle_deg, GroundTruthSample, TargetRegion};

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geom::{CameraIntrinsics, GeomError, RigidTransform, ScreenGeometry, ScreenModel};

/// Frame interval of the simulated 30 fps recording.
pub const TIMESTEP_US: i64 = 33_333;
pub const APPEARANCE_SOURCE: &str = "appearance";
pub const TRACKER_SOURCE: &str = "tracker2d";
/// The six recording distances of the reference protocol (mm).
pub const PROTOCOL_DISTANCES_MM: [f64; 6] = [300.0, 500.0, 750.0, 1100.0, 1400.0, 1800.0];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    Config(String),
    #[error("target region {width_mm:.1}×{height_mm:.1} mm does not fit on the screen")]
    RegionExceedsScreen { width_mm: f64, height_mm: f64 },
    #[error("zero mirror normal")]
    ZeroNormal,
    #[error("camera lies on the mirror plane")]
    CameraOnMirror,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Condition {
    #[default]
    Indoor,
    Outdoor,
    Glasses,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Indoor => "indoor",
            Self::Outdoor => "outdoor",
            Self::Glasses => "glasses",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "indoor" => Ok(Self::Indoor),
            "outdoor" => Ok(Self::Outdoor),
            "glasses" => Ok(Self::Glasses),
            other => Err(SynthError::Config(format!("unknown condition `{other}`"))),
        }
    }
}

/// Strength of the condition surrogates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionFactors {
    /// Outdoor: multiplier on landmark and iris noise.
    pub outdoor_noise_factor: f64,
    /// Glasses: magnitude of the fixed per-session landmark bias (px).
    pub glasses_bias_px: f64,
    /// Glasses: multiplier on iris noise.
    pub glasses_iris_factor: f64,
}

impl Default for ConditionFactors {
    fn default() -> Self {
        Self { outdoor_noise_factor: 1.5, glasses_bias_px: 2.0, glasses_iris_factor: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSpec {
    /// Constant visual angle seen from the nominal face position.
    VisualAngle { width_deg: f64, height_deg: f64 },
    Millimetres { width_mm: f64, height_mm: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub distance_mm: f64,
    pub region: RegionSpec,
    /// Gap between the region's bottom edge and the screen's bottom edge.
    pub region_margin_mm: f64,
    pub n_samples: usize,
    pub landmark_noise_px: f64,
    pub iris_noise_px: f64,
    /// RMS angular deviation of the simulated appearance estimate.
    pub direction_noise_deg: f64,
    /// Fixed (yaw, pitch) offset of the simulated appearance estimate.
    pub direction_bias_deg: (f64, f64),
    /// Uniform half-ranges of (yaw, pitch, roll) head jitter.
    pub head_jitter_deg: (f64, f64, f64),
    /// Uniform half-range of lateral and vertical head displacement.
    pub position_jitter_mm: f64,
    pub condition: Condition,
    pub factors: ConditionFactors,
    pub emit_tracker_2d: bool,
    pub participant_id: String,
    pub start_timestamp_us: i64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            distance_mm: 750.0,
            region: RegionSpec::VisualAngle { width_deg: 34.0, height_deg: 19.0 },
            region_margin_mm: 10.0,
            n_samples: 80,
            landmark_noise_px: 0.0,
            iris_noise_px: 0.0,
            direction_noise_deg: 0.0,
            direction_bias_deg: (0.0, 0.0),
            head_jitter_deg: (5.0, 5.0, 3.0),
            position_jitter_mm: 20.0,
            condition: Condition::Indoor,
            factors: ConditionFactors::default(),
            emit_tracker_2d: true,
            participant_id: "synthetic".into(),
            start_timestamp_us: 0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.distance_mm.is_finite() && self.distance_mm > 0.0) {
            return bad("distance must be positive");
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive");
        }
        let noises = [self.landmark_noise_px, self.iris_noise_px, self.direction_noise_deg, self.position_jitter_mm];
        let (jy, jp, jr) = self.head_jitter_deg;
        if !noises.into_iter().chain([jy, jp, jr, self.region_margin_mm]).all(nonneg) {
            return bad("noise levels, jitter ranges and margin must be non-negative");
        }
        let f = self.factors;
        if ![f.outdoor_noise_factor, f.glasses_bias_px, f.glasses_iris_factor].into_iter().all(nonneg) {
            return bad("condition factors must be non-negative");
        }
        if !(self.direction_bias_deg.0.is_finite() && self.direction_bias_deg.1.is_finite()) {
            return bad("direction bias must be finite");
        }
        let positive = |a: f64, b: f64| a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0;
        match self.region {
            RegionSpec::VisualAngle { width_deg, height_deg } if !(positive(width_deg, height_deg) && width_deg < 180.0 && height_deg < 180.0) => {
                bad("region angles must lie in (0, 180) degrees")
            }
            RegionSpec::Millimetres { width_mm, height_mm } if !positive(width_mm, height_mm) => bad("region size must be positive"),
            _ => Ok(()),
        }
    }
}

/// 1920×1080 webcam with a 1400 px focal length.
pub fn default_camera() -> CameraIntrinsics<f64> {
    CameraIntrinsics { fx: 1400.0, fy: 1400.0, cx: 960.0, cy: 540.0, width_px: 1920, height_px: 1080 }
}

/// 55-inch 16:9 display facing the user, camera centred 30 mm below its bottom edge.
pub fn default_screen() -> ScreenModel<f64> {
    let rotation = Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0));
    let geometry = ScreenGeometry { width_mm: 1218.0, height_mm: 685.0, width_px: 1920, height_px: 1080 };
    ScreenModel { pose: RigidTransform { rotation, translation: Vector3::new(609.0, -(685.0 + 30.0), 0.0) }, geometry }
}
