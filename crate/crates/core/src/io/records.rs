//! Line-based session, estimate and ground-truth files.
//!
//! Record lines are `timestamp_us source_id kind v1 v2 …` with kinds
//! `lm6` (12 values), `lm8` (16, landmarks then iris), `target` (2),
//! `dir3` (3) and `px2` (2).

use std::collections::HashMap;

use nalgebra::{Matrix3, Point2, Vector2, Vector3};

use super::header::{parse_floats, split_header, BodyLine, FileHeader, FORMAT_ESTIMATES, FORMAT_SESSION, FORMAT_TRUTH};
use super::{format_float, IoError};
use crate::estimators::{EstimateRecord, Payload, PayloadKind, ReplayEstimator};
use crate::geom::{CameraIntrinsics, GazeSample, RigidTransform, ScreenGeometry, ScreenModel};
use crate::headpose::{LandmarkSet, NUM_LANDMARKS};
use crate::session::{ClickEvent, EstimateStream, SessionLog, SessionMetadata, CLICK_SOURCE, LANDMARK_SOURCE};
use crate::synthlab::GroundTruthSample;

const TRUTH_VALUES: usize = 2 + 3 + 9 + 3 + 3 + 3 + 12 + 4 + 12 + 4 + 3;

fn join(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(format_float).collect::<Vec<_>>().join(" ")
}

fn points_flat(ps: &[Point2<f64>]) -> Vec<f64> {
    ps.iter().flat_map(|p| [p.x, p.y]).collect()
}

fn mat_flat(m: &Matrix3<f64>) -> Vec<f64> {
    (0..3).flat_map(|r| (0..3).map(move |c| m[(r, c)])).collect()
}

fn mat_from(v: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(v)
}

struct Record<'a> {
    line: usize,
    timestamp_us: i64,
    source: &'a str,
    kind: &'a str,
    values: Vec<&'a str>,
}

fn split_record<'a>(b: &BodyLine<'a>) -> Result<Record<'a>, IoError> {
    let mut f = b.text.split_whitespace();
    let (Some(ts), Some(source), Some(kind)) = (f.next(), f.next(), f.next()) else {
        return Err(IoError::malformed(b.line, "expected `timestamp_us source_id kind values…`"));
    };
    let timestamp_us = ts.parse().map_err(|_| IoError::malformed(b.line, format!("invalid timestamp `{ts}`")))?;
    Ok(Record { line: b.line, timestamp_us, source, kind, values: f.collect() })
}

fn payload(r: &Record) -> Result<Payload<f64>, IoError> {
    match r.kind {
        "dir3" => {
            let v = parse_floats(r.line, &r.values, 3, "dir3")?;
            Ok(Payload::Direction(Vector3::new(v[0], v[1], v[2])))
        }
        "px2" => {
            let v = parse_floats(r.line, &r.values, 2, "px2")?;
            Ok(Payload::ScreenPoint(Point2::new(v[0], v[1])))
        }
        other => Err(IoError::malformed(r.line, format!("unknown estimate kind `{other}`"))),
    }
}

fn payload_line(r: &EstimateRecord<f64>) -> String {
    match r.payload {
        Payload::Direction(d) => format!("{} {} dir3 {}", r.timestamp_us, r.source_id, join(d.iter().copied())),
        Payload::ScreenPoint(p) => format!("{} {} px2 {}", r.timestamp_us, r.source_id, join([p.x, p.y])),
    }
}

fn landmark_line(l: &LandmarkSet<f64>) -> String {
    let mut v = points_flat(&l.points);
    let kind = match &l.iris_centers {
        Some(iris) => {
            v.extend(points_flat(iris));
            "lm8"
        }
        None => "lm6",
    };
    format!("{} {LANDMARK_SOURCE} {kind} {}", l.timestamp_us, join(v))
}

fn landmarks_from(line: usize, v: &[f64], iris: bool, timestamp_us: i64) -> Result<LandmarkSet<f64>, IoError> {
    let pt = |k: usize| Point2::new(v[2 * k], v[2 * k + 1]);
    let points: [Point2<f64>; NUM_LANDMARKS] = std::array::from_fn(pt);
    let iris_centers = iris.then(|| [pt(NUM_LANDMARKS), pt(NUM_LANDMARKS + 1)]);
    let lm = LandmarkSet { points, iris_centers, timestamp_us };
    lm.validate().map_err(|e| IoError::malformed(line, e.to_string()))?;
    Ok(lm)
}

fn valid_source(line: usize, s: &str) -> Result<(), IoError> {
    if s.starts_with('#') {
        return Err(IoError::malformed(line, "source id must not start with `#`"));
    }
    Ok(())
}

/// Per-stream strictly-increasing check.
#[derive(Default)]
struct SortCheck(HashMap<String, i64>);

impl SortCheck {
    fn check(&mut self, r: &Record) -> Result<(), IoError> {
        if let Some(prev) = self.0.get(r.source) {
            if r.timestamp_us <= *prev {
                return Err(IoError::Unsorted { line: r.line, stream: r.source.to_string() });
            }
        }
        self.0.insert(r.source.to_string(), r.timestamp_us);
        Ok(())
    }
}

fn meta_floats(h: &FileHeader, key: &str, n: usize) -> Result<Vec<f64>, IoError> {
    let v = h.get(key).ok_or_else(|| IoError::Schema(format!("missing metadata key `{key}`")))?;
    let fields: Vec<&str> = v.split_whitespace().collect();
    parse_floats(0, &fields, n, key).map_err(|e| IoError::Schema(format!("metadata `{key}`: {e}")))
}

fn as_u32(key: &str, x: f64) -> Result<u32, IoError> {
    if x.fract() == 0.0 && x > 0.0 && x <= u32::MAX as f64 {
        Ok(x as u32)
    } else {
        Err(IoError::Schema(format!("metadata `{key}`: pixel sizes must be positive integers")))
    }
}

pub(crate) fn camera_from_meta(h: &FileHeader) -> Result<CameraIntrinsics<f64>, IoError> {
    let c = meta_floats(h, "camera", 6)?;
    CameraIntrinsics::new(c[0], c[1], c[2], c[3], as_u32("camera", c[4])?, as_u32("camera", c[5])?)
        .map_err(|e| IoError::Schema(format!("metadata `camera`: {e}")))
}

pub(crate) fn camera_meta(c: &CameraIntrinsics<f64>) -> String {
    join([c.fx, c.fy, c.cx, c.cy, c.width_px as f64, c.height_px as f64])
}

pub(crate) fn geometry_from_meta(h: &FileHeader) -> Result<ScreenGeometry<f64>, IoError> {
    let s = meta_floats(h, "screen_size", 4)?;
    ScreenGeometry::new(s[0], s[1], as_u32("screen_size", s[2])?, as_u32("screen_size", s[3])?)
        .map_err(|e| IoError::Schema(format!("metadata `screen_size`: {e}")))
}

pub(crate) fn geometry_meta(g: &ScreenGeometry<f64>) -> String {
    join([g.width_mm, g.height_mm, g.width_px as f64, g.height_px as f64])
}

const SESSION_KEYS: [&str; 7] =
    ["participant_id", "condition", "distance_mm", "camera", "screen_size", "screen_rotation", "screen_translation"];

fn session_metadata(h: &FileHeader) -> Result<SessionMetadata<f64>, IoError> {
    let text = |k: &str| h.get(k).map(str::to_string).ok_or_else(|| IoError::Schema(format!("missing metadata key `{k}`")));
    let r = meta_floats(h, "screen_rotation", 9)?;
    let t = meta_floats(h, "screen_translation", 3)?;
    let pose = RigidTransform::new(mat_from(&r), Vector3::new(t[0], t[1], t[2]))
        .map_err(|e| IoError::Schema(format!("metadata `screen_rotation`: {e}")))?;
    let screen = ScreenModel::new(pose, geometry_from_meta(h)?).map_err(|e| IoError::Schema(e.to_string()))?;
    Ok(SessionMetadata {
        participant_id: text("participant_id")?,
        condition_tag: text("condition")?,
        distance_mm: meta_floats(h, "distance_mm", 1)?[0],
        screen,
        intrinsics: camera_from_meta(h)?,
        extra: h.metadata.iter().filter(|(k, _)| !SESSION_KEYS.contains(&k.as_str())).cloned().collect(),
    })
}

pub fn parse_session(text: &str) -> Result<SessionLog<f64>, IoError> {
    let (header, body) = split_header(text, FORMAT_SESSION)?;
    let metadata = session_metadata(&header)?;
    let mut log = SessionLog { metadata, landmarks: vec![], estimates: vec![], clicks: vec![] };
    let mut sorted = SortCheck::default();
    for b in &body {
        let r = split_record(b)?;
        valid_source(r.line, r.source)?;
        match (r.source, r.kind) {
            (LANDMARK_SOURCE, "lm6" | "lm8") => {
                let iris = r.kind == "lm8";
                let v = parse_floats(r.line, &r.values, if iris { 16 } else { 12 }, r.kind)?;
                sorted.check(&r)?;
                log.landmarks.push(landmarks_from(r.line, &v, iris, r.timestamp_us)?);
            }
            (CLICK_SOURCE, "target") => {
                let v = parse_floats(r.line, &r.values, 2, "target")?;
                sorted.check(&r)?;
                log.clicks.push(ClickEvent { timestamp_us: r.timestamp_us, target_px: Point2::new(v[0], v[1]) });
            }
            (LANDMARK_SOURCE | CLICK_SOURCE, kind) => {
                return Err(IoError::malformed(r.line, format!("kind `{kind}` is not valid for source `{}`", r.source)));
            }
            (source, _) => {
                let payload = payload(&r)?;
                sorted.check(&r)?;
                let rec = EstimateRecord { timestamp_us: r.timestamp_us, source_id: source.to_string(), payload };
                match log.estimates.iter_mut().find(|s| s.source_id == source) {
                    Some(s) if s.kind != payload.kind() => {
                        return Err(IoError::malformed(r.line, format!("stream `{source}` mixes payload kinds")));
                    }
                    Some(s) => s.records.push(rec),
                    None => log.estimates.push(EstimateStream { source_id: source.into(), kind: payload.kind(), records: vec![rec] }),
                }
            }
        }
    }
    Ok(log)
}

/// Canonical form: records ordered by timestamp, then landmarks, estimate streams in order, clicks.
pub fn write_session(log: &SessionLog<f64>) -> String {
    let md = &log.metadata;
    let mut h = FileHeader::new(FORMAT_SESSION);
    h.push("participant_id", md.participant_id.clone());
    h.push("condition", md.condition_tag.clone());
    h.push("distance_mm", format_float(md.distance_mm));
    h.push("camera", camera_meta(&md.intrinsics));
    h.push("screen_size", geometry_meta(&md.screen.geometry));
    h.push("screen_rotation", join(mat_flat(&md.screen.pose.rotation)));
    h.push("screen_translation", join(md.screen.pose.translation.iter().copied()));
    h.metadata.extend(md.extra.iter().cloned());

    let mut lines: Vec<(i64, usize, String)> = vec![];
    lines.extend(log.landmarks.iter().map(|l| (l.timestamp_us, 0, landmark_line(l))));
    for (k, s) in log.estimates.iter().enumerate() {
        lines.extend(s.records.iter().map(|r| (r.timestamp_us, k + 1, payload_line(r))));
    }
    let click_rank = log.estimates.len() + 1;
    lines.extend(log.clicks.iter().map(|c| {
        (c.timestamp_us, click_rank, format!("{} {CLICK_SOURCE} target {}", c.timestamp_us, join([c.target_px.x, c.target_px.y])))
    }));
    lines.sort_by_key(|(t, rank, _)| (*t, *rank));
    let mut out = h.render();
    for (_, _, l) in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateFile {
    pub header: FileHeader,
    pub records: Vec<EstimateRecord<f64>>,
}

pub fn parse_estimates(text: &str) -> Result<EstimateFile, IoError> {
    let (header, body) = split_header(text, FORMAT_ESTIMATES)?;
    let mut sorted = SortCheck::default();
    let mut kinds: HashMap<String, PayloadKind> = HashMap::new();
    let mut records = Vec::with_capacity(body.len());
    for b in &body {
        let r = split_record(b)?;
        valid_source(r.line, r.source)?;
        let payload = payload(&r)?;
        sorted.check(&r)?;
        if *kinds.entry(r.source.to_string()).or_insert(payload.kind()) != payload.kind() {
            return Err(IoError::malformed(r.line, format!("stream `{}` mixes payload kinds", r.source)));
        }
        records.push(EstimateRecord { timestamp_us: r.timestamp_us, source_id: r.source.to_string(), payload });
    }
    Ok(EstimateFile { header, records })
}

pub fn write_estimates(file: &EstimateFile) -> String {
    let mut out = file.header.render();
    for r in &file.records {
        out.push_str(&payload_line(r));
        out.push('\n');
    }
    out
}

/// Replay estimator over one stream of an estimate file (all records when `source` is `None`).
pub fn load_replay_estimator(
    path: &std::path::Path,
    source: Option<&str>,
    window_us: i64,
    screen: Option<ScreenModel<f64>>,
) -> Result<ReplayEstimator<f64>, IoError> {
    let file = parse_estimates(&super::read_text(path)?)?;
    ReplayEstimator::new(file.records, source, window_us, screen)
        .map_err(|e| IoError::Schema(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthFile {
    pub header: FileHeader,
    pub samples: Vec<GroundTruthSample>,
}

fn truth_values(s: &GroundTruthSample) -> Vec<f64> {
    let mut v = vec![s.target_px.x, s.target_px.y];
    v.extend(s.target_cam.iter());
    v.extend(mat_flat(&s.head_pose.rotation));
    v.extend(s.head_pose.translation.iter());
    v.extend(s.face_center.iter());
    v.extend(s.gaze.direction().iter());
    v.extend(points_flat(&s.landmarks.points));
    v.extend(points_flat(s.landmarks.iris_centers.as_ref().expect("synthetic samples carry iris centres")));
    v.extend(s.landmark_noise.iter().flat_map(|n| [n.x, n.y]));
    v.extend(s.iris_noise.iter().flat_map(|n| [n.x, n.y]));
    v.extend(s.appearance_direction.iter());
    v
}

pub fn write_truth(file: &TruthFile) -> String {
    let mut out = file.header.render();
    for s in &file.samples {
        out.push_str(&format!("{} truth sample {}\n", s.timestamp_us, join(truth_values(s))));
    }
    out
}

pub fn parse_truth(text: &str) -> Result<TruthFile, IoError> {
    let (header, body) = split_header(text, FORMAT_TRUTH)?;
    let mut sorted = SortCheck::default();
    let mut samples = Vec::with_capacity(body.len());
    for b in &body {
        let r = split_record(b)?;
        if (r.source, r.kind) != ("truth", "sample") {
            return Err(IoError::malformed(r.line, "expected `timestamp_us truth sample values…`"));
        }
        let v = parse_floats(r.line, &r.values, TRUTH_VALUES, "truth sample")?;
        sorted.check(&r)?;
        let bad = |e: crate::geom::GeomError| IoError::malformed(r.line, e.to_string());
        let v3 = |i: usize| Vector3::new(v[i], v[i + 1], v[i + 2]);
        let head_pose = RigidTransform::new(mat_from(&v[5..14]), v3(14)).map_err(bad)?;
        let face_center = v3(17);
        let gaze = GazeSample::from_unit(face_center, v3(20), r.timestamp_us).map_err(bad)?;
        let landmarks = landmarks_from(r.line, &v[23..39], true, r.timestamp_us)?;
        let n2 = |i: usize| Vector2::new(v[i], v[i + 1]);
        samples.push(GroundTruthSample {
            timestamp_us: r.timestamp_us,
            target_px: Point2::new(v[0], v[1]),
            target_cam: v3(2),
            head_pose,
            face_center,
            gaze,
            landmarks,
            landmark_noise: std::array::from_fn(|k| n2(39 + 2 * k)),
            iris_noise: std::array::from_fn(|k| n2(51 + 2 * k)),
            appearance_direction: v3(55),
        });
    }
    Ok(TruthFile { header, samples })
}
