//! Personal calibration (cubic 2D→2D correction) and camera–screen extrinsic
//! calibration from planar-mirror observations.

mod mirror;
mod personal;

pub use mirror::{
    calibrate_screen_from_mirrors, homography_dlt, solve_reflected_pose, MirrorCalibration, MirrorConfig, MirrorObservation,
    MirrorPlane, MIN_MIRROR_ANGLE_DEG, MAX_CONDITION,
};
pub use personal::{apply_calibration, fit_personal_calibration, monomials, CalibrationProfile, Corrected, NUM_TERMS};

use thiserror::Error;

use crate::geom::GeomError;
use crate::pnp::PnpError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("insufficient data: need at least {required}, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("non-finite calibration input")]
    NonFinite,
    #[error("pattern corners are collinear or coincident")]
    Collinear,
    #[error("pattern geometry and detected corner counts differ ({geometry} vs {detected})")]
    LengthMismatch { geometry: usize, detected: usize },
    #[error("degenerate homography")]
    DegenerateHomography,
    #[error("mirror observations {a} and {b} differ by only {angle_deg:.3}° (minimum {min_deg}°)")]
    MirrorsTooClose { a: usize, b: usize, angle_deg: f64, min_deg: f64 },
    #[error("ill-conditioned {what} (condition number {condition:.3e})")]
    IllConditioned { what: &'static str, condition: f64 },
    #[error("refinement failed: {0}")]
    Refinement(&'static str),
    #[error(transparent)]
    Pnp(#[from] PnpError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}
