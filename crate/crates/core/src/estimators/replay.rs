//! Replays logged per-frame estimates by nearest-timestamp lookup.

use nalgebra::{Point2, Vector3};

use super::{EstimatorError, EstimatorInput, GazeEstimate, GazeEstimator};
use crate::geom::{gaze_from_target, screen_px_to_camera_3d, GazeSample, ScreenModel};
use crate::scalar::Scalar;

/// Half a frame interval at 30 fps-class rates.
pub const DEFAULT_WINDOW_US: i64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    /// Gaze direction in the camera frame.
    Direction,
    /// On-screen gaze point in pixels.
    ScreenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload<T: Scalar> {
    Direction(Vector3<T>),
    ScreenPoint(Point2<T>),
}

impl<T: Scalar> Payload<T> {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Self::Direction(_) => PayloadKind::Direction,
            Self::ScreenPoint(_) => PayloadKind::ScreenPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord<T: Scalar> {
    pub timestamp_us: i64,
    pub source_id: String,
    pub payload: Payload<T>,
}

#[derive(Debug, Clone)]
pub struct ReplayEstimator<T: Scalar> {
    name: String,
    kind: PayloadKind,
    /// Strictly increasing by timestamp.
    records: Vec<EstimateRecord<T>>,
    window_us: i64,
    screen: Option<ScreenModel<T>>,
}

impl<T: Scalar> ReplayEstimator<T> {
    /// Keeps the records of `source_id` (all records when `None`).
    pub fn new(
        records: Vec<EstimateRecord<T>>,
        source_id: Option<&str>,
        window_us: i64,
        screen: Option<ScreenModel<T>>,
    ) -> Result<Self, EstimatorError> {
        let records: Vec<_> = match source_id {
            Some(id) => records.into_iter().filter(|r| r.source_id == id).collect(),
            None => records,
        };
        let first = records.first().ok_or_else(|| EstimatorError::Unavailable("no replay records".into()))?;
        let kind = first.payload.kind();
        let name = source_id.unwrap_or(&first.source_id).to_string();
        for (i, w) in records.windows(2).enumerate() {
            if w[1].timestamp_us <= w[0].timestamp_us {
                return Err(EstimatorError::UnsortedRecords { index: i + 1 });
            }
        }
        if records.iter().any(|r| r.payload.kind() != kind) {
            return Err(EstimatorError::MixedPayloads);
        }
        if kind == PayloadKind::ScreenPoint && screen.is_none() {
            return Err(EstimatorError::MissingScreen);
        }
        Ok(Self { name, kind, records, window_us, screen })
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn records(&self) -> &[EstimateRecord<T>] {
        &self.records
    }

    /// Nearest record within the window; ties go to the earlier record.
    pub fn lookup(&self, timestamp_us: i64) -> Option<&EstimateRecord<T>> {
        let idx = self.records.partition_point(|r| r.timestamp_us < timestamp_us);
        let candidates = [idx.checked_sub(1), Some(idx)];
        candidates
            .into_iter()
            .flatten()
            .filter_map(|i| self.records.get(i))
            .map(|r| ((r.timestamp_us - timestamp_us).abs(), r))
            .filter(|(dt, _)| *dt <= self.window_us)
            .min_by_key(|(dt, _)| *dt)
            .map(|(_, r)| r)
    }
}

impl<T: Scalar> GazeEstimator<T> for ReplayEstimator<T> {
    fn name(&self) -> &str {
        &self.name
    }

    fn estimate(&self, input: &EstimatorInput<T>) -> Result<GazeEstimate<T>, EstimatorError> {
        let rec = self
            .lookup(input.timestamp_us)
            .ok_or_else(|| EstimatorError::Unavailable(format!("no record within {} us of {}", self.window_us, input.timestamp_us)))?;
        let sample = match rec.payload {
            Payload::Direction(d) => GazeSample::from_unit(input.face_center, d, rec.timestamp_us)
                .or_else(|_| GazeSample::new(input.face_center, d, rec.timestamp_us))?,
            Payload::ScreenPoint(p) => {
                let screen = self.screen.as_ref().ok_or(EstimatorError::MissingScreen)?;
                let target = screen_px_to_camera_3d(&p, screen).value;
                gaze_from_target(&input.face_center, &target, rec.timestamp_us)?
            }
        };
        Ok(GazeEstimate::Monocular(sample))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{intersect_ray_screen, RigidTransform, ScreenGeometry};
    use crate::headpose::{FaceModel3D, LandmarkSet};
    use nalgebra::Matrix3;

    fn input_at(t: i64) -> EstimatorInput<f64> {
        let lm = LandmarkSet::new([Point2::new(1.0, 1.0); 6], None, t).unwrap();
        EstimatorInput::new(lm, RigidTransform::from_translation(Vector3::new(10.0, 20.0, 600.0)), &FaceModel3D::default())
    }

    fn dir_records() -> Vec<EstimateRecord<f64>> {
        (0..5)
            .map(|i| EstimateRecord {
                timestamp_us: i * 33_333,
                source_id: "cnn".into(),
                payload: Payload::Direction(Vector3::new(0.1 * i as f64, -0.2, -1.0).normalize()),
            })
            .collect()
    }

    #[test]
    fn exact_timestamp_returns_logged_value_verbatim() {
        let rep = ReplayEstimator::new(dir_records(), Some("cnn"), DEFAULT_WINDOW_US, None).unwrap();
        let GazeEstimate::Monocular(g) = rep.estimate(&input_at(66_666)).unwrap() else { panic!() };
        let Payload::Direction(d) = dir_records()[2].payload else { panic!() };
        assert_eq!(*g.direction(), d);
        assert_eq!(g.timestamp_us, 66_666);
    }

    #[test]
    fn window_rule() {
        let rep = ReplayEstimator::new(dir_records(), None, DEFAULT_WINDOW_US, None).unwrap();
        assert_eq!(rep.lookup(33_333 + 3_000).unwrap().timestamp_us, 33_333);
        assert_eq!(rep.lookup(66_666 - 3_000).unwrap().timestamp_us, 66_666);
        assert!(rep.lookup(4 * 33_333 + 50_000).is_none());
        assert!(matches!(rep.estimate(&input_at(-50_000)), Err(EstimatorError::Unavailable(_))));
    }

    #[test]
    fn unsorted_records_rejected() {
        let mut recs = dir_records();
        recs.swap(1, 2);
        assert_eq!(
            ReplayEstimator::new(recs, None, DEFAULT_WINDOW_US, None).unwrap_err(),
            EstimatorError::UnsortedRecords { index: 2 }
        );
    }

    #[test]
    fn screen_points_are_lifted_through_the_face_centre() {
        let screen = ScreenModel::new(
            RigidTransform::new(Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, -1.0)), Vector3::new(609.0, -715.0, 0.0)).unwrap(),
            ScreenGeometry::new(1218.0, 685.0, 1920, 1080).unwrap(),
        )
        .unwrap();
        let px = Point2::new(700.0, 300.0);
        let recs = vec![EstimateRecord { timestamp_us: 0, source_id: "tobii".into(), payload: Payload::ScreenPoint(px) }];
        assert_eq!(
            ReplayEstimator::new(recs.clone(), None, DEFAULT_WINDOW_US, None).unwrap_err(),
            EstimatorError::MissingScreen
        );
        let rep = ReplayEstimator::new(recs, None, DEFAULT_WINDOW_US, Some(screen)).unwrap();
        let input = input_at(0);
        let GazeEstimate::Monocular(g) = rep.estimate(&input).unwrap() else { panic!() };
        assert_eq!(g.origin, input.face_center);
        assert!((intersect_ray_screen(&g, &screen).unwrap().value - px).norm() < 1e-9);
    }
}
