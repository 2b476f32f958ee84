//! Model-based estimator: per-eye ray from the eyeball centre to the pupil.

use nalgebra::{Unit, Vector3};

use super::{EstimatorError, EstimatorInput, GazeEstimate, GazeEstimator};
use crate::geom::{CameraIntrinsics, GazeSample, RigidTransform};
use crate::headpose::FaceModel3D;
use crate::scalar::{lit, Scalar};

/// Relative discriminant slack under which a ray counts as tangent.
const TANGENT_SLACK: f64 = 1e-9;

/// Near intersection of the ray `t·dir` (t > 0) with a sphere, or `None` if it misses.
pub fn intersect_eyeball<T: Scalar>(dir: &Unit<Vector3<T>>, center: &Vector3<T>, radius: T) -> Option<Vector3<T>> {
    let b = dir.dot(center);
    let c = center.norm_squared() - radius * radius;
    let mut disc = b * b - c;
    if disc < T::zero() {
        if disc < -lit::<T>(TANGENT_SLACK) * radius * radius {
            return None;
        }
        disc = T::zero();
    }
    let t = b - disc.sqrt();
    if !(t > T::zero()) {
        return None;
    }
    Some(dir.into_inner() * t)
}

/// Per-eye gaze from camera rays through the two iris centres (left, right).
pub fn geometric_from_rays<T: Scalar>(
    head_pose: &RigidTransform<T>,
    model: &FaceModel3D<T>,
    iris_rays: &[Unit<Vector3<T>>; 2],
    timestamp_us: i64,
) -> [Result<GazeSample<T>, EstimatorError>; 2] {
    let eye = |k: usize, name: &'static str| {
        let center = head_pose.apply(&model.eyeball_centers[k]);
        let pupil = intersect_eyeball(&iris_rays[k], &center, model.eyeball_radius)
            .ok_or(EstimatorError::NoIntersection { eye: name })?;
        Ok(GazeSample::new(center, pupil - center, timestamp_us)?)
    };
    [eye(0, "left"), eye(1, "right")]
}

pub fn geometric_estimate<T: Scalar>(
    input: &EstimatorInput<T>,
    model: &FaceModel3D<T>,
    cam: &CameraIntrinsics<T>,
) -> Result<GazeEstimate<T>, EstimatorError> {
    let iris = input.landmarks.iris_centers.ok_or(EstimatorError::MissingIris)?;
    let rays = [cam.pixel_ray(&iris[0]), cam.pixel_ray(&iris[1])];
    match geometric_from_rays(&input.head_pose, model, &rays, input.timestamp_us) {
        [Ok(left), Ok(right)] => Ok(GazeEstimate::Binocular { left, right }),
        [Ok(g), Err(_)] | [Err(_), Ok(g)] => Ok(GazeEstimate::Monocular(g)),
        [Err(_), Err(_)] => Err(EstimatorError::BothEyesFailed),
    }
}

#[derive(Debug, Clone)]
pub struct GeometricEstimator<T: Scalar> {
    pub model: FaceModel3D<T>,
    pub cam: CameraIntrinsics<T>,
}

impl<T: Scalar> GazeEstimator<T> for GeometricEstimator<T> {
    fn name(&self) -> &str {
        "geometric"
    }

    fn estimate(&self, input: &EstimatorInput<T>) -> Result<GazeEstimate<T>, EstimatorError> {
        geometric_estimate(input, &self.model, &self.cam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::angular_error;
    use crate::headpose::{reproject, LandmarkSet};
    use nalgebra::{Point2, Rotation3};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cam() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(1400.0, 1400.0, 960.0, 540.0, 1920, 1080).unwrap()
    }

    /// Frame with both eyes fixating `target`; returns the input and true per-eye directions.
    fn frame(pose: RigidTransform<f64>, target: Vector3<f64>) -> (EstimatorInput<f64>, [Vector3<f64>; 2]) {
        let model = FaceModel3D::default();
        let mut iris = [Point2::origin(); 2];
        let mut truth = [Vector3::zeros(); 2];
        for k in 0..2 {
            let c = pose.apply(&model.eyeball_centers[k]);
            truth[k] = (target - c).normalize();
            iris[k] = cam().project(&(c + truth[k] * model.eyeball_radius)).unwrap();
        }
        let lm = LandmarkSet::new(reproject(&model, &pose, &cam()).unwrap(), Some(iris), 0).unwrap();
        (EstimatorInput::new(lm, pose, &model), truth)
    }

    fn estimator() -> GeometricEstimator<f64> {
        GeometricEstimator { model: FaceModel3D::default(), cam: cam() }
    }

    #[test]
    fn looking_at_camera_is_recovered() {
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 600.0));
        let (input, truth) = frame(pose, Vector3::zeros());
        let GazeEstimate::Binocular { left, right } = estimator().estimate(&input).unwrap() else { panic!() };
        assert!((left.direction() - truth[0]).norm() < 1e-6);
        assert!((right.direction() - truth[1]).norm() < 1e-6);
        assert!((left.direction().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn missing_iris_is_reported() {
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 600.0));
        let (mut input, _) = frame(pose, Vector3::zeros());
        input.landmarks.iris_centers = None;
        assert_eq!(estimator().estimate(&input), Err(EstimatorError::MissingIris));
    }

    #[test]
    fn sphere_intersection_cases() {
        let z = Unit::new_normalize(Vector3::new(0.0f64, 0.0, 1.0));
        let hit = intersect_eyeball(&z, &Vector3::new(0.0, 0.0, 100.0), 10.0).unwrap();
        assert!((hit.z - 90.0).abs() < 1e-12);
        let tangent = intersect_eyeball(&z, &Vector3::new(10.0, 0.0, 100.0), 10.0).unwrap();
        assert!((tangent - Vector3::new(0.0, 0.0, 100.0)).norm() < 1e-9);
        assert!(intersect_eyeball(&z, &Vector3::new(10.5, 0.0, 100.0), 10.0).is_none());
    }

    #[test]
    fn one_eye_missing_degrades_to_monocular() {
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 600.0));
        let (mut input, truth) = frame(pose, Vector3::zeros());
        let iris = input.landmarks.iris_centers.as_mut().unwrap();
        iris[1] = Point2::new(1900.0, 20.0);
        let GazeEstimate::Monocular(g) = estimator().estimate(&input).unwrap() else { panic!() };
        assert!((g.direction() - truth[0]).norm() < 1e-6);
        let iris = input.landmarks.iris_centers.as_mut().unwrap();
        iris[0] = Point2::new(5.0, 5.0);
        assert_eq!(estimator().estimate(&input), Err(EstimatorError::BothEyesFailed));
    }

    fn mean_error_at(distance: f64, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, distance));
        let target = Vector3::new(150.0, 250.0, 0.0);
        let mut total = 0.0;
        let mut n = 0;
        for _ in 0..trials {
            let (mut input, truth) = frame(pose, target);
            for p in input.landmarks.iris_centers.as_mut().unwrap() {
                p.x += noise.sample(&mut rng);
                p.y += noise.sample(&mut rng);
            }
            if let Ok(est) = estimator().estimate(&input) {
                for (g, t) in est.samples().iter().zip(&truth) {
                    total += angular_error(g.direction(), t).unwrap();
                    n += 1;
                }
            }
        }
        total / n as f64
    }

    #[test]
    fn iris_noise_hurts_more_at_distance() {
        let near = mean_error_at(600.0, 200, 11);
        let far = mean_error_at(1800.0, 200, 11);
        assert!(far > near, "near {near} far {far}");
    }

    proptest! {
        #[test]
        fn rotating_the_scene_rotates_the_output(
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            tx in -100.0f64..100.0, ty in -100.0f64..100.0,
        ) {
            let model = FaceModel3D::default();
            let pose = RigidTransform::from_scaled_axis(Vector3::new(0.1, -0.2, 0.05), Vector3::new(tx, ty, 700.0));
            let (input, _) = frame(pose, Vector3::new(50.0, 200.0, 0.0));
            let iris = input.landmarks.iris_centers.unwrap();
            let rays = [cam().pixel_ray(&iris[0]), cam().pixel_ray(&iris[1])];
            let base = geometric_from_rays(&pose, &model, &rays, 0);
            let q = Rotation3::new(Vector3::new(ax, ay, az)).into_inner();
            let q_pose = RigidTransform { rotation: q * pose.rotation, translation: q * pose.translation };
            let q_rays = [Unit::new_normalize(q * rays[0].into_inner()), Unit::new_normalize(q * rays[1].into_inner())];
            let rotated = geometric_from_rays(&q_pose, &model, &q_rays, 0);
            for (a, b) in base.iter().zip(&rotated) {
                let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
                prop_assert!((q * a.direction() - b.direction()).norm() < 1e-9);
                prop_assert!((a.direction().norm() - 1.0).abs() < 1e-9);
                prop_assert!(a.origin.iter().all(|v| v.is_finite()));
            }
        }
    }
}
