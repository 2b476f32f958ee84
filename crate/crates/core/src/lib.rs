//! Geometry toolkit and evaluation harness for webcam gaze estimation.
//!
//! Geometry is generic over [`Scalar`] (`f32` or `f64`); the simulator,
//! benchmark and file formats work in `f64`. The aliases below fix the scalar
//! for the common case.

pub mod bench;
pub mod calibration;
pub mod estimators;
pub mod geom;
pub mod headpose;
pub mod io;
pub mod lm;
pub mod normalization;
pub mod pnp;
pub mod scalar;
pub mod session;
pub mod synthlab;

pub use scalar::Scalar;

pub type CameraIntrinsics = geom::CameraIntrinsics<f64>;
pub type RigidTransform = geom::RigidTransform<f64>;
pub type GazeSample = geom::GazeSample<f64>;
pub type ScreenGeometry = geom::ScreenGeometry<f64>;
pub type ScreenModel = geom::ScreenModel<f64>;
pub type LandmarkSet = headpose::LandmarkSet<f64>;
pub type FaceModel3D = headpose::FaceModel3D<f64>;
pub type HeadPose = headpose::HeadPose<f64>;
pub type NormalizationParams = normalization::NormalizationParams<f64>;
pub type NormalizedFrame = normalization::NormalizedFrame<f64>;
pub type CalibrationProfile = calibration::CalibrationProfile<f64>;
pub type MirrorObservation = calibration::MirrorObservation<f64>;
pub type MirrorPlane = calibration::MirrorPlane<f64>;
pub type GazeEstimate = estimators::GazeEstimate<f64>;
pub type EstimatorInput = estimators::EstimatorInput<f64>;
pub type SessionLog = session::SessionLog<f64>;
