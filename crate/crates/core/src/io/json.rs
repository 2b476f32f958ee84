//! JSON documents for calibration profiles and screen models.
//!
//! Every document carries `format` and `version`; unknown fields are rejected.
//! serde_json prints the shortest decimal that parses back to the same bits.

use nalgebra::{Matrix3, Point2, Vector3};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::header::FORMAT_VERSION;
use super::IoError;
use crate::calibration::{CalibrationProfile, NUM_TERMS};
use crate::geom::{RigidTransform, ScreenGeometry, ScreenModel};

pub const FORMAT_PROFILE: &str = "gazekit-profile";
pub const FORMAT_SCREEN: &str = "gazekit-screen";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDoc {
    format: String,
    version: u32,
    /// Row 0 → x, row 1 → y; monomial order 1, u, v, u², uv, v², u³, u²v, uv², v³.
    coeffs: [[f64; NUM_TERMS]; 2],
    width_px: f64,
    height_px: f64,
    region_min: [f64; 2],
    region_max: [f64; 2],
    n_samples: usize,
    rms_residual: f64,
    created_at_us: i64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenDoc {
    format: String,
    version: u32,
    width_mm: f64,
    height_mm: f64,
    width_px: u32,
    height_px: u32,
    /// Row-major; maps screen-frame mm to camera-frame mm.
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

fn decode<D: DeserializeOwned>(text: &str, expected: &str) -> Result<D, IoError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| IoError::malformed(e.line(), e.to_string()))?;
    let obj = value.as_object().ok_or_else(|| IoError::Schema("document must be a JSON object".into()))?;
    match obj.get("format").and_then(|f| f.as_str()) {
        Some(f) if f == expected => {}
        Some(f) => return Err(IoError::WrongFormat { expected: expected.into(), found: f.into() }),
        None => return Err(IoError::Schema("missing string field `format`".into())),
    }
    match obj.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(IoError::VersionMismatch { found: u32::try_from(v).unwrap_or(u32::MAX), supported: FORMAT_VERSION })
        }
        None => return Err(IoError::Schema("missing integer field `version`".into())),
    }
    serde_json::from_value(value).map_err(|e| IoError::Schema(e.to_string()))
}

fn encode<S: Serialize>(doc: &S) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("plain structs always serialize");
    s.push('\n');
    s
}

pub fn profile_to_json(p: &CalibrationProfile<f64>) -> Result<String, IoError> {
    let finite = p.coeffs.iter().flatten().chain([&p.width_px, &p.height_px, &p.rms_residual]).all(|v| v.is_finite())
        && [p.region_min, p.region_max].iter().all(|q| q.x.is_finite() && q.y.is_finite());
    if !finite {
        return Err(IoError::Schema("profile contains non-finite values".into()));
    }
    Ok(encode(&ProfileDoc {
        format: FORMAT_PROFILE.into(),
        version: FORMAT_VERSION,
        coeffs: p.coeffs,
        width_px: p.width_px,
        height_px: p.height_px,
        region_min: [p.region_min.x, p.region_min.y],
        region_max: [p.region_max.x, p.region_max.y],
        n_samples: p.n_samples,
        rms_residual: p.rms_residual,
        created_at_us: p.created_at_us,
    }))
}

pub fn parse_profile(text: &str) -> Result<CalibrationProfile<f64>, IoError> {
    let d: ProfileDoc = decode(text, FORMAT_PROFILE)?;
    if !(d.width_px > 0.0 && d.height_px > 0.0) {
        return Err(IoError::Schema("width_px and height_px must be positive".into()));
    }
    Ok(CalibrationProfile {
        coeffs: d.coeffs,
        width_px: d.width_px,
        height_px: d.height_px,
        region_min: Point2::new(d.region_min[0], d.region_min[1]),
        region_max: Point2::new(d.region_max[0], d.region_max[1]),
        n_samples: d.n_samples,
        rms_residual: d.rms_residual,
        created_at_us: d.created_at_us,
    })
}

pub fn screen_to_json(s: &ScreenModel<f64>) -> String {
    let r = &s.pose.rotation;
    let g = &s.geometry;
    encode(&ScreenDoc {
        format: FORMAT_SCREEN.into(),
        version: FORMAT_VERSION,
        width_mm: g.width_mm,
        height_mm: g.height_mm,
        width_px: g.width_px,
        height_px: g.height_px,
        rotation: std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)])),
        translation: [s.pose.translation.x, s.pose.translation.y, s.pose.translation.z],
    })
}

pub fn parse_screen(text: &str) -> Result<ScreenModel<f64>, IoError> {
    let d: ScreenDoc = decode(text, FORMAT_SCREEN)?;
    let schema = |e: crate::geom::GeomError| IoError::Schema(e.to_string());
    let rotation = Matrix3::from_fn(|i, j| d.rotation[i][j]);
    let pose = RigidTransform::new(rotation, Vector3::from(d.translation)).map_err(schema)?;
    let geometry = ScreenGeometry::new(d.width_mm, d.height_mm, d.width_px, d.height_px).map_err(schema)?;
    ScreenModel::new(pose, geometry).map_err(schema)
}
