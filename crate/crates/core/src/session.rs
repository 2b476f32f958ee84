//! Recorded session: landmark stream, estimate streams and click events.

use nalgebra::Point2;
use thiserror::Error;

use crate::estimators::{EstimateRecord, PayloadKind};
use crate::geom::{CameraIntrinsics, ScreenModel};
use crate::headpose::LandmarkSet;
use crate::scalar::Scalar;

pub const LANDMARK_SOURCE: &str = "landmarks";
pub const CLICK_SOURCE: &str = "click";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("stream `{stream}` is not strictly increasing at record {index}")]
    Unsorted { stream: String, index: usize },
    #[error("estimate stream `{0}` mixes payload kinds or source ids")]
    InconsistentStream(String),
    #[error("duplicate estimate stream `{0}`")]
    DuplicateStream(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMetadata<T: Scalar> {
    pub participant_id: String,
    pub condition_tag: String,
    pub distance_mm: T,
    pub screen: ScreenModel<T>,
    pub intrinsics: CameraIntrinsics<T>,
    /// Additional key/value pairs, preserved in order.
    pub extra: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickEvent<T: Scalar> {
    pub timestamp_us: i64,
    pub target_px: Point2<T>,
}

/// Records of one estimate source, all of the same payload kind.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateStream<T: Scalar> {
    pub source_id: String,
    pub kind: PayloadKind,
    pub records: Vec<EstimateRecord<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog<T: Scalar> {
    pub metadata: SessionMetadata<T>,
    pub landmarks: Vec<LandmarkSet<T>>,
    pub estimates: Vec<EstimateStream<T>>,
    pub clicks: Vec<ClickEvent<T>>,
}

fn check_sorted(stream: &str, ts: impl Iterator<Item = i64>) -> Result<(), SessionError> {
    let mut prev = None;
    for (i, t) in ts.enumerate() {
        if prev.is_some_and(|p| t <= p) {
            return Err(SessionError::Unsorted { stream: stream.to_string(), index: i });
        }
        prev = Some(t);
    }
    Ok(())
}

impl<T: Scalar> SessionLog<T> {
    pub fn validate(&self) -> Result<(), SessionError> {
        check_sorted(LANDMARK_SOURCE, self.landmarks.iter().map(|l| l.timestamp_us))?;
        check_sorted(CLICK_SOURCE, self.clicks.iter().map(|c| c.timestamp_us))?;
        for (i, s) in self.estimates.iter().enumerate() {
            if self.estimates[..i].iter().any(|o| o.source_id == s.source_id) {
                return Err(SessionError::DuplicateStream(s.source_id.clone()));
            }
            if s.records.iter().any(|r| r.source_id != s.source_id || r.payload.kind() != s.kind) {
                return Err(SessionError::InconsistentStream(s.source_id.clone()));
            }
            check_sorted(&s.source_id, s.records.iter().map(|r| r.timestamp_us))?;
        }
        Ok(())
    }

    pub fn stream(&self, source_id: &str) -> Option<&EstimateStream<T>> {
        self.estimates.iter().find(|s| s.source_id == source_id)
    }
}
