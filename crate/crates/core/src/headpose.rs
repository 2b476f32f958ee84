//! Head pose from six facial landmarks fitted to a generic 3D face model.

use nalgebra::{Matrix3, Point2, Vector3};
use thiserror::Error;

use crate::geom::{CameraIntrinsics, GeomError, RigidTransform};
use crate::lm::LmConfig;
use crate::pnp::{self, PnpError};
use crate::scalar::{lit, Scalar};

pub const NUM_LANDMARKS: usize = 6;

/// Landmark order used throughout the crate.
pub const LANDMARK_NAMES: [&str; NUM_LANDMARKS] =
    ["outer_left_eye", "inner_left_eye", "inner_right_eye", "outer_right_eye", "left_mouth", "right_mouth"];

/// Index pairs mirrored across the head's x = 0 plane.
const MIRROR_PAIRS: [(usize, usize); 3] = [(0, 3), (1, 2), (4, 5)];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(&'static str),
    #[error("invalid face model: {0}")]
    InvalidModel(String),
    #[error("pose solver failed: mean reprojection error {mean_reprojection_px:.3} px exceeds {threshold_px} px")]
    Diverged { mean_reprojection_px: f64, threshold_px: f64 },
    #[error("face lies behind the camera after solving")]
    BehindCamera,
    #[error(transparent)]
    Pnp(#[from] PnpError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Six detected facial landmarks (pixels) with optional iris centres `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet<T: Scalar> {
    pub points: [Point2<T>; NUM_LANDMARKS],
    pub iris_centers: Option<[Point2<T>; 2]>,
    pub timestamp_us: i64,
}

impl<T: Scalar> LandmarkSet<T> {
    pub fn new(points: [Point2<T>; NUM_LANDMARKS], iris_centers: Option<[Point2<T>; 2]>, timestamp_us: i64) -> Result<Self, PoseError> {
        let lm = Self { points, iris_centers, timestamp_us };
        lm.validate()?;
        Ok(lm)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let finite = |p: &Point2<T>| p.x.is_finite() && p.y.is_finite();
        if !self.points.iter().all(finite) {
            return Err(PoseError::InvalidLandmarks("non-finite landmark"));
        }
        if let Some(iris) = &self.iris_centers {
            if !iris.iter().all(finite) {
                return Err(PoseError::InvalidLandmarks("non-finite iris centre"));
            }
        }
        Ok(())
    }
}

/// Generic 3D face model in the head frame (mm): x towards the image-left eye
/// is negative, y points down (chin), z points into the head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceModel3D<T: Scalar> {
    pub points: [Vector3<T>; NUM_LANDMARKS],
    /// `[left, right]`, same side convention as the landmarks.
    pub eyeball_centers: [Vector3<T>; 2],
    pub eyeball_radius: T,
}

impl<T: Scalar> FaceModel3D<T> {
    pub fn new(points: [Vector3<T>; NUM_LANDMARKS], eyeball_centers: [Vector3<T>; 2], eyeball_radius: T) -> Result<Self, PoseError> {
        let m = Self { points, eyeball_centers, eyeball_radius };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), PoseError> {
        let tol: T = lit(1e-6);
        let mirrored = |a: &Vector3<T>, b: &Vector3<T>| {
            (a.x + b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
        };
        for &(a, b) in &MIRROR_PAIRS {
            if !mirrored(&self.points[a], &self.points[b]) {
                return Err(PoseError::InvalidModel(format!(
                    "landmarks {} and {} are not mirror images across x = 0",
                    LANDMARK_NAMES[a], LANDMARK_NAMES[b]
                )));
            }
        }
        if !mirrored(&self.eyeball_centers[0], &self.eyeball_centers[1]) {
            return Err(PoseError::InvalidModel("eyeball centres are not mirror images across x = 0".into()));
        }
        if !(self.eyeball_radius > T::zero()) {
            return Err(PoseError::InvalidModel("eyeball radius must be positive".into()));
        }
        let c = self.centroid();
        let mut cov = Matrix3::zeros();
        for p in &self.points {
            cov += (p - c) * (p - c).transpose();
        }
        let mut ev: Vec<T> = cov.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        if !(ev[0] > T::zero()) || (ev[1].max(T::zero()) / ev[0]).sqrt() < lit(pnp::PLANAR_RATIO) {
            return Err(PoseError::InvalidModel("model points are degenerate (collinear)".into()));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Vector3<T> {
        self.points.iter().fold(Vector3::zeros(), |a, p| a + p) / lit::<T>(NUM_LANDMARKS as f64)
    }
}

impl<T: Scalar> Default for FaceModel3D<T> {
    /// Eye corners on the y = 0 plane spanning 90 mm, mouth corners 60 mm apart
    /// and 55 mm below, eyeball centres 12 mm behind the eye-corner midpoints.
    fn default() -> Self {
        let v = |x: f64, y: f64, z: f64| Vector3::new(lit(x), lit(y), lit(z));
        Self {
            points: [
                v(-45.0, 0.0, 10.0),
                v(-15.0, 0.0, 0.0),
                v(15.0, 0.0, 0.0),
                v(45.0, 0.0, 10.0),
                v(-30.0, 55.0, 8.0),
                v(30.0, 55.0, 8.0),
            ],
            eyeball_centers: [v(-30.0, 0.0, 17.0), v(30.0, 0.0, 17.0)],
            eyeball_radius: lit(12.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PoseConfig<T: Scalar> {
    pub lm: LmConfig<T>,
    /// Reject solutions whose mean reprojection error exceeds this (pixels).
    pub max_mean_reprojection_px: T,
}

impl<T: Scalar> Default for PoseConfig<T> {
    fn default() -> Self {
        Self { lm: LmConfig::default(), max_mean_reprojection_px: lit(20.0) }
    }
}

/// Estimated head pose (head frame → camera frame) with fit diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadPose<T: Scalar> {
    pub transform: RigidTransform<T>,
    pub mean_reprojection_px: T,
    pub rms_reprojection_px: T,
    /// RMS reprojection error of the EPnP initialization.
    pub initial_rms_reprojection_px: T,
    pub iterations: usize,
}

/// Perspective projection of the six model points under `pose`.
pub fn reproject<T: Scalar>(
    model: &FaceModel3D<T>,
    pose: &RigidTransform<T>,
    cam: &CameraIntrinsics<T>,
) -> Result<[Point2<T>; NUM_LANDMARKS], GeomError> {
    let mut out = [Point2::origin(); NUM_LANDMARKS];
    for (o, p) in out.iter_mut().zip(&model.points) {
        *o = cam.project(&pose.apply(p))?;
    }
    Ok(out)
}

/// Centroid of the six model landmarks in the camera frame.
pub fn face_center<T: Scalar>(pose: &RigidTransform<T>, model: &FaceModel3D<T>) -> Vector3<T> {
    pose.apply(&model.centroid())
}

fn rms<T: Scalar>(errs: &[T]) -> T {
    (errs.iter().fold(T::zero(), |s, e| s + *e * *e) / lit(errs.len() as f64)).sqrt()
}

/// EPnP initialization followed by LM refinement of the reprojection error.
pub fn estimate_head_pose<T: Scalar>(
    lm: &LandmarkSet<T>,
    model: &FaceModel3D<T>,
    cam: &CameraIntrinsics<T>,
    cfg: &PoseConfig<T>,
) -> Result<HeadPose<T>, PoseError> {
    lm.validate()?;
    let init = pnp::epnp(&model.points, &lm.points, cam)?;
    let initial_errs = pnp::reprojection_errors(&model.points, &lm.points, cam, &init).map_err(|_| PoseError::BehindCamera)?;
    let (transform, report) = pnp::refine_pose(&model.points, &lm.points, cam, &init, &cfg.lm)?;
    let errs = pnp::reprojection_errors(&model.points, &lm.points, cam, &transform).map_err(|_| PoseError::BehindCamera)?;
    let mean = errs.iter().fold(T::zero(), |s, e| s + *e) / lit(errs.len() as f64);
    if !(mean <= cfg.max_mean_reprojection_px) {
        return Err(PoseError::Diverged {
            mean_reprojection_px: mean.to_f64_lossy(),
            threshold_px: cfg.max_mean_reprojection_px.to_f64_lossy(),
        });
    }
    Ok(HeadPose {
        transform,
        mean_reprojection_px: mean,
        rms_reprojection_px: rms(&errs),
        initial_rms_reprojection_px: rms(&initial_errs),
        iterations: report.iterations,
    })
}
