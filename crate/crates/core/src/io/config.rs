//! `key = value` configuration files (or a flat JSON object with the same keys).
//!
//! Lengths accept `mm`, `cm` or `m` and default to mm; angles accept `deg` or
//! `rad` and default to degrees; pixel quantities accept `px`. Lists are
//! separated by commas or whitespace.

use nalgebra::Vector3;

use super::{format_float, IoError};
use crate::bench::{Aggregation, EstimatorSpec, SplitMode, SweepConfig, CALIBRATION_LADDER};
use crate::geom::CameraIntrinsics;
use crate::headpose::{FaceModel3D, LANDMARK_NAMES, NUM_LANDMARKS};
use crate::synthlab::{Condition, RegionSpec, SceneConfig, PROTOCOL_DISTANCES_MM};

/// Raw value with the 1-based line it came from (0 for JSON input).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigValue {
    pub key: String,
    pub line: usize,
    pub raw: String,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dim {
    Length,
    Angle,
    Pixels,
}

impl ConfigValue {
    fn bad(&self, msg: impl std::fmt::Display) -> IoError {
        IoError::malformed(self.line, format!("`{}`: {msg}", self.key))
    }

    fn number(&self, token: &str) -> Result<f64, IoError> {
        match token.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.bad(format!("`{token}` is not a finite number"))),
        }
    }

    /// Splits a trailing alphabetic unit suffix off `token`.
    fn quantity_token(&self, token: &str, dim: Dim) -> Result<(f64, Option<Dim>), IoError> {
        let split = token.trim_end_matches(|c: char| c.is_ascii_alphabetic()).len();
        let (num, unit) = token.split_at(split);
        if num.is_empty() {
            return Err(self.bad(format!("`{token}` is not a number")));
        }
        let x = self.number(num)?;
        let (factor, found) = match unit {
            "" => (1.0, None),
            "mm" => (1.0, Some(Dim::Length)),
            "cm" => (10.0, Some(Dim::Length)),
            "m" => (1000.0, Some(Dim::Length)),
            "deg" => (1.0, Some(Dim::Angle)),
            "rad" => (180.0 / std::f64::consts::PI, Some(Dim::Angle)),
            "px" => (1.0, Some(Dim::Pixels)),
            _ => return Err(IoError::Unit { line: self.line, key: self.key.clone(), unit: unit.into() }),
        };
        if found.is_some_and(|d| d != dim) {
            return Err(IoError::Unit { line: self.line, key: self.key.clone(), unit: unit.into() });
        }
        Ok((x * factor, found))
    }

    fn tokens(&self) -> Vec<&str> {
        self.raw.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).collect()
    }

    fn single(&self) -> Result<&str, IoError> {
        match self.tokens().as_slice() {
            [t] => Ok(t),
            _ => Err(self.bad("expected a single value")),
        }
    }

    pub fn float(&self) -> Result<f64, IoError> {
        self.number(self.single()?)
    }

    pub fn length_mm(&self) -> Result<f64, IoError> {
        Ok(self.quantity_token(self.single()?, Dim::Length)?.0)
    }

    pub fn angle_deg(&self) -> Result<f64, IoError> {
        Ok(self.quantity_token(self.single()?, Dim::Angle)?.0)
    }

    pub fn pixels(&self) -> Result<f64, IoError> {
        Ok(self.quantity_token(self.single()?, Dim::Pixels)?.0)
    }

    pub fn lengths_mm(&self) -> Result<Vec<f64>, IoError> {
        self.tokens().iter().map(|t| Ok(self.quantity_token(t, Dim::Length)?.0)).collect()
    }

    pub fn uint<N: std::str::FromStr>(&self) -> Result<N, IoError> {
        let t = self.single()?;
        t.parse().map_err(|_| self.bad(format!("`{t}` is not a non-negative integer")))
    }

    pub fn uints(&self) -> Result<Vec<usize>, IoError> {
        self.tokens().iter().map(|t| t.parse().map_err(|_| self.bad(format!("`{t}` is not a non-negative integer")))).collect()
    }

    pub fn int(&self) -> Result<i64, IoError> {
        let t = self.single()?;
        t.parse().map_err(|_| self.bad(format!("`{t}` is not an integer")))
    }

    pub fn boolean(&self) -> Result<bool, IoError> {
        match self.single()? {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            t => Err(self.bad(format!("`{t}` is not a boolean"))),
        }
    }

    pub fn text(&self) -> Result<String, IoError> {
        let t = self.raw.trim();
        if t.is_empty() {
            return Err(self.bad("empty value"));
        }
        Ok(t.to_string())
    }

    fn vec3_mm(&self) -> Result<Vector3<f64>, IoError> {
        match self.lengths_mm()?.as_slice() {
            &[x, y, z] => Ok(Vector3::new(x, y, z)),
            _ => Err(self.bad("expected three coordinates")),
        }
    }
}

fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Parses either syntax into pairs in file order; duplicate keys are errors.
pub fn parse_config_pairs(text: &str) -> Result<Vec<ConfigValue>, IoError> {
    let mut out: Vec<ConfigValue> = vec![];
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::malformed(e.line(), e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| IoError::Schema("config must be a JSON object".into()))?;
        for (key, val) in obj {
            let raw = match val {
                serde_json::Value::Array(items) => items.iter().map(json_scalar).collect::<Option<Vec<_>>>().map(|v| v.join(" ")),
                other => json_scalar(other),
            }
            .ok_or_else(|| IoError::Schema(format!("`{key}` must be a string, number, boolean or flat array")))?;
            out.push(ConfigValue { key: key.clone(), line: 0, raw });
        }
        return Ok(out);
    }
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = line.split_once('#').map_or(line, |(c, _)| c).trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| IoError::malformed(line_no, "expected `key = value`"))?;
        let key = k.trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(IoError::malformed(line_no, format!("invalid key `{key}`")));
        }
        if out.iter().any(|c| c.key == key) {
            return Err(IoError::malformed(line_no, format!("duplicate key `{key}`")));
        }
        out.push(ConfigValue { key: key.into(), line: line_no, raw: v.trim().into() });
    }
    Ok(out)
}

fn unknown(v: &ConfigValue) -> IoError {
    IoError::UnknownKey { line: v.line, key: v.key.clone() }
}

/// Region extents seen so far; both must use the same kind of unit.
#[derive(Default)]
struct RegionKeys {
    width: Option<(f64, bool)>,
    height: Option<(f64, bool)>,
}

fn region_extent(v: &ConfigValue) -> Result<(f64, bool), IoError> {
    let (x, dim) = v.quantity_token(v.single()?, Dim::Angle).or_else(|_| v.quantity_token(v.single()?, Dim::Length))?;
    // A bare number is an angle; only explicit length units select millimetres.
    Ok((x, dim != Some(Dim::Length)))
}

/// Applies one scene key; returns `false` if the key is not a scene key.
fn apply_scene_key(cfg: &mut SceneConfig, region: &mut RegionKeys, v: &ConfigValue) -> Result<bool, IoError> {
    match v.key.as_str() {
        "distance" => cfg.distance_mm = v.length_mm()?,
        "region_width" => region.width = Some(region_extent(v)?),
        "region_height" => region.height = Some(region_extent(v)?),
        "region_margin" => cfg.region_margin_mm = v.length_mm()?,
        "n_samples" => cfg.n_samples = v.uint()?,
        "landmark_noise" => cfg.landmark_noise_px = v.pixels()?,
        "iris_noise" => cfg.iris_noise_px = v.pixels()?,
        "direction_noise" => cfg.direction_noise_deg = v.angle_deg()?,
        "direction_bias_yaw" => cfg.direction_bias_deg.0 = v.angle_deg()?,
        "direction_bias_pitch" => cfg.direction_bias_deg.1 = v.angle_deg()?,
        "head_jitter_yaw" => cfg.head_jitter_deg.0 = v.angle_deg()?,
        "head_jitter_pitch" => cfg.head_jitter_deg.1 = v.angle_deg()?,
        "head_jitter_roll" => cfg.head_jitter_deg.2 = v.angle_deg()?,
        "position_jitter" => cfg.position_jitter_mm = v.length_mm()?,
        "condition" => cfg.condition = v.single()?.parse::<Condition>().map_err(|e| v.bad(e))?,
        "outdoor_noise_factor" => cfg.factors.outdoor_noise_factor = v.float()?,
        "glasses_bias" => cfg.factors.glasses_bias_px = v.pixels()?,
        "glasses_iris_factor" => cfg.factors.glasses_iris_factor = v.float()?,
        "emit_tracker_2d" => cfg.emit_tracker_2d = v.boolean()?,
        "participant_id" => cfg.participant_id = v.single()?.to_string(),
        "start_timestamp_us" => cfg.start_timestamp_us = v.int()?,
        _ => return Ok(false),
    }
    Ok(true)
}

fn finish_region(cfg: &mut SceneConfig, region: RegionKeys) -> Result<(), IoError> {
    let (w, h) = match (region.width, region.height) {
        (None, None) => return Ok(()),
        (Some(w), Some(h)) => (w, h),
        _ => return Err(IoError::Schema("region_width and region_height must be given together".into())),
    };
    cfg.region = match (w.1, h.1) {
        (true, true) => RegionSpec::VisualAngle { width_deg: w.0, height_deg: h.0 },
        (false, false) => RegionSpec::Millimetres { width_mm: w.0, height_mm: h.0 },
        _ => return Err(IoError::Schema("region_width and region_height must both be angles or both lengths".into())),
    };
    Ok(())
}

fn validated(cfg: SceneConfig) -> Result<SceneConfig, IoError> {
    cfg.validate().map_err(|e| IoError::Schema(e.to_string()))?;
    Ok(cfg)
}

pub fn parse_scene_config(text: &str) -> Result<SceneConfig, IoError> {
    let mut cfg = SceneConfig::default();
    let mut region = RegionKeys::default();
    for v in parse_config_pairs(text)? {
        if v.key == "seed" {
            cfg.seed = v.uint()?;
        } else if !apply_scene_key(&mut cfg, &mut region, &v)? {
            return Err(unknown(&v));
        }
    }
    finish_region(&mut cfg, region)?;
    validated(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Distance,
    CalibrationSamples,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub distances_mm: Vec<f64>,
    pub counts: Vec<usize>,
    /// Calibration samples per session in a distance sweep.
    pub n_cal: usize,
    pub config: SweepConfig,
}

pub fn parse_sweep_spec(text: &str) -> Result<SweepSpec, IoError> {
    let mut spec = SweepSpec {
        kind: SweepKind::Distance,
        distances_mm: PROTOCOL_DISTANCES_MM.to_vec(),
        counts: CALIBRATION_LADDER.to_vec(),
        n_cal: 0,
        config: SweepConfig::default(),
    };
    let mut saw_kind = false;
    let mut region = RegionKeys::default();
    for v in parse_config_pairs(text)? {
        let c = &mut spec.config;
        match v.key.as_str() {
            "sweep" => {
                saw_kind = true;
                spec.kind = match v.single()? {
                    "distance" => SweepKind::Distance,
                    "calibration" => SweepKind::CalibrationSamples,
                    t => return Err(v.bad(format!("unknown sweep `{t}` (expected distance or calibration)"))),
                }
            }
            "distances" => spec.distances_mm = v.lengths_mm()?,
            "counts" => spec.counts = v.uints()?,
            "n_cal" => spec.n_cal = v.uint()?,
            "trials" => c.trials = v.uint()?,
            "seed" => c.seed = v.uint()?,
            "n_test" => c.n_test = v.uint()?,
            "estimators" => {
                c.estimators = v.tokens().iter().map(|t| t.parse::<EstimatorSpec>().map_err(|e| v.bad(e))).collect::<Result<_, _>>()?
            }
            "aggregation" => {
                c.aggregation = match v.single()? {
                    "per-session" => Aggregation::PerSession,
                    "pooled" => Aggregation::Pooled,
                    t => return Err(v.bad(format!("unknown aggregation `{t}` (expected per-session or pooled)"))),
                }
            }
            "split" => {
                c.eval.split = match v.tokens().as_slice() {
                    ["sequential"] => SplitMode::Sequential,
                    ["shuffled", seed] => SplitMode::Shuffled(seed.parse().map_err(|_| v.bad("shuffle seed must be an integer"))?),
                    _ => return Err(v.bad("expected `sequential` or `shuffled <seed>`")),
                }
            }
            "window_us" => c.eval.window_us = v.int()?,
            "camera" => {
                let f: Vec<f64> = v.tokens().iter().map(|t| v.number(t)).collect::<Result<_, _>>()?;
                let px = |x: f64| if x.fract() == 0.0 && x > 0.0 && x < u32::MAX as f64 { Ok(x as u32) } else { Err(v.bad("image size must be positive integers")) };
                let [fx, fy, cx, cy, w, h] = f[..] else { return Err(v.bad("expected fx fy cx cy width_px height_px")) };
                c.cam = CameraIntrinsics::new(fx, fy, cx, cy, px(w)?, px(h)?).map_err(|e| v.bad(e))?;
            }
            _ => {
                if !apply_scene_key(&mut c.scene, &mut region, &v)? {
                    return Err(unknown(&v));
                }
            }
        }
    }
    if !saw_kind {
        return Err(IoError::Schema("missing key `sweep`".into()));
    }
    finish_region(&mut spec.config.scene, region)?;
    spec.config.scene = validated(spec.config.scene.clone())?;
    if spec.config.estimators.is_empty() || spec.config.trials == 0 {
        return Err(IoError::Schema("a sweep needs at least one estimator and one trial".into()));
    }
    match spec.kind {
        SweepKind::Distance if spec.distances_mm.is_empty() => return Err(IoError::Schema("`distances` is empty".into())),
        SweepKind::CalibrationSamples if spec.counts.is_empty() => return Err(IoError::Schema("`counts` is empty".into())),
        _ => {}
    }
    Ok(spec)
}

const LEFT_EYEBALL: &str = "left_eyeball";
const RIGHT_EYEBALL: &str = "right_eyeball";
const EYEBALL_RADIUS: &str = "eyeball_radius";

/// Keys missing from the file keep the default model's values.
pub fn parse_face_model(text: &str) -> Result<FaceModel3D<f64>, IoError> {
    let mut m = FaceModel3D::default();
    for v in parse_config_pairs(text)? {
        match v.key.as_str() {
            LEFT_EYEBALL => m.eyeball_centers[0] = v.vec3_mm()?,
            RIGHT_EYEBALL => m.eyeball_centers[1] = v.vec3_mm()?,
            EYEBALL_RADIUS => m.eyeball_radius = v.length_mm()?,
            k => match LANDMARK_NAMES.iter().position(|n| *n == k) {
                Some(i) => m.points[i] = v.vec3_mm()?,
                None => return Err(unknown(&v)),
            },
        }
    }
    m.validate().map_err(|e| IoError::Schema(e.to_string()))?;
    Ok(m)
}

pub fn write_face_model(m: &FaceModel3D<f64>) -> String {
    let v3 = |p: &Vector3<f64>| format!("{} {} {}", format_float(p.x), format_float(p.y), format_float(p.z));
    let mut s = String::from("# head frame, millimetres\n");
    for i in 0..NUM_LANDMARKS {
        s.push_str(&format!("{} = {}\n", LANDMARK_NAMES[i], v3(&m.points[i])));
    }
    s.push_str(&format!("{LEFT_EYEBALL} = {}\n", v3(&m.eyeball_centers[0])));
    s.push_str(&format!("{RIGHT_EYEBALL} = {}\n", v3(&m.eyeball_centers[1])));
    s.push_str(&format!("{EYEBALL_RADIUS} = {}\n", format_float(m.eyeball_radius)));
    s
}
