//! Gaze estimators: a common interface, a model-based landmark estimator and a
//! replay adapter for externally produced estimates.

mod geometric;
mod replay;

pub use geometric::{geometric_estimate, geometric_from_rays, intersect_eyeball, GeometricEstimator};
pub use replay::{EstimateRecord, Payload, PayloadKind, ReplayEstimator, DEFAULT_WINDOW_US};

use nalgebra::{Point2, Vector3};
use thiserror::Error;

use crate::geom::{intersect_ray_screen, midpoint_gaze_point, Bounded, GazeSample, GeomError, RigidTransform, ScreenModel};
use crate::headpose::{face_center, FaceModel3D, LandmarkSet};
use crate::normalization::NormalizedFrame;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    /// The estimator has no output for this frame; the frame is skipped.
    #[error("estimate unavailable: {0}")]
    Unavailable(String),
    #[error("iris centres are required but missing")]
    MissingIris,
    #[error("camera ray through the {eye} iris misses the eyeball")]
    NoIntersection { eye: &'static str },
    #[error("no eye produced a gaze ray")]
    BothEyesFailed,
    #[error("replay records are not strictly increasing at index {index}")]
    UnsortedRecords { index: usize },
    #[error("replay source mixes payload kinds")]
    MixedPayloads,
    #[error("screen-point payloads require a screen model")]
    MissingScreen,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Per-frame features handed to an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorInput<T: Scalar> {
    pub landmarks: LandmarkSet<T>,
    pub head_pose: RigidTransform<T>,
    /// Face centre under `head_pose`; origin of face-level gaze rays.
    pub face_center: Vector3<T>,
    pub normalized: Option<NormalizedFrame<T>>,
    pub timestamp_us: i64,
}

impl<T: Scalar> EstimatorInput<T> {
    pub fn new(landmarks: LandmarkSet<T>, head_pose: RigidTransform<T>, model: &FaceModel3D<T>) -> Self {
        let timestamp_us = landmarks.timestamp_us;
        Self { face_center: face_center(&head_pose, model), landmarks, head_pose, normalized: None, timestamp_us }
    }
}

/// Output of an estimator: one face-level ray or one ray per eye.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GazeEstimate<T: Scalar> {
    Monocular(GazeSample<T>),
    Binocular { left: GazeSample<T>, right: GazeSample<T> },
}

impl<T: Scalar> GazeEstimate<T> {
    pub fn samples(&self) -> Vec<GazeSample<T>> {
        match self {
            Self::Monocular(g) => vec![*g],
            Self::Binocular { left, right } => vec![*left, *right],
        }
    }

    /// On-screen gaze point; binocular estimates use the midpoint of both eyes.
    pub fn screen_point(&self, screen: &ScreenModel<T>) -> Result<Bounded<Point2<T>>, GeomError> {
        match self {
            Self::Monocular(g) => intersect_ray_screen(g, screen),
            Self::Binocular { left, right } => midpoint_gaze_point(left, right, screen),
        }
    }
}

/// Estimators are immutable after construction and may be shared across threads.
pub trait GazeEstimator<T: Scalar>: Send + Sync {
    fn name(&self) -> &str;

    fn estimate(&self, input: &EstimatorInput<T>) -> Result<GazeEstimate<T>, EstimatorError>;
}
