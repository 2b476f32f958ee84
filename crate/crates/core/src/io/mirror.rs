//! Mirror-calibration datasets: one line `k gx gy u v` per detected corner,
//! where `k` is the observation index, `(gx, gy)` the corner in screen pixels
//! and `(u, v)` its detection in the camera image.

use nalgebra::Point2;

use super::header::{parse_floats, split_header, FileHeader, FORMAT_MIRROR};
use super::records::{camera_from_meta, camera_meta, geometry_from_meta, geometry_meta};
use super::{format_float, IoError};
use crate::calibration::MirrorObservation;
use crate::geom::{CameraIntrinsics, ScreenGeometry};

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorDataset {
    pub camera: CameraIntrinsics<f64>,
    pub geometry: ScreenGeometry<f64>,
    pub observations: Vec<MirrorObservation<f64>>,
    /// Metadata beyond `camera` and `screen_size`, in file order.
    pub extra: Vec<(String, String)>,
}

pub fn parse_mirror_dataset(text: &str) -> Result<MirrorDataset, IoError> {
    let (header, body) = split_header(text, FORMAT_MIRROR)?;
    let camera = camera_from_meta(&header)?;
    let geometry = geometry_from_meta(&header)?;
    let extra = header.metadata.iter().filter(|(k, _)| k != "camera" && k != "screen_size").cloned().collect();
    let mut observations: Vec<MirrorObservation<f64>> = vec![];
    for b in &body {
        let fields: Vec<&str> = b.text.split_whitespace().collect();
        let Some((k, rest)) = fields.split_first() else { continue };
        let k: usize = k.parse().map_err(|_| IoError::malformed(b.line, format!("invalid observation index `{k}`")))?;
        let v = parse_floats(b.line, rest, 4, "corner")?;
        if k == observations.len() {
            observations.push(MirrorObservation { pattern_corners_px: vec![], pattern_geometry: vec![] });
        } else if k + 1 != observations.len() {
            return Err(IoError::malformed(b.line, format!("observation index {k} out of sequence")));
        }
        let obs = observations.last_mut().expect("pushed above");
        obs.pattern_geometry.push(Point2::new(v[0], v[1]));
        obs.pattern_corners_px.push(Point2::new(v[2], v[3]));
    }
    Ok(MirrorDataset { camera, geometry, observations, extra })
}

pub fn write_mirror_dataset(d: &MirrorDataset) -> String {
    let mut h = FileHeader::new(FORMAT_MIRROR);
    h.push("camera", camera_meta(&d.camera));
    h.push("screen_size", geometry_meta(&d.geometry));
    h.metadata.extend(d.extra.iter().cloned());
    let mut out = h.render();
    for (k, o) in d.observations.iter().enumerate() {
        for (g, c) in o.pattern_geometry.iter().zip(&o.pattern_corners_px) {
            out.push_str(&format!("{k} {} {} {} {}\n", format_float(g.x), format_float(g.y), format_float(c.x), format_float(c.y)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthlab::{checker_pattern, default_camera, default_screen, mirror_observations, standard_mirrors};

    #[test]
    fn round_trip() {
        let screen = default_screen();
        let cam = default_camera();
        let pattern = checker_pattern(&screen.geometry, 8, 5);
        let obs = mirror_observations(&screen, &standard_mirrors(&screen, 3).unwrap(), &cam, &pattern, 0.3, 4).unwrap();
        let d = MirrorDataset { camera: cam, geometry: screen.geometry, observations: obs, extra: vec![("rig".into(), "bench 2".into())] };
        let text = write_mirror_dataset(&d);
        assert_eq!(parse_mirror_dataset(&text).unwrap(), d);
    }

    #[test]
    fn out_of_sequence_index_is_located() {
        let screen = default_screen();
        let mut h = FileHeader::new(FORMAT_MIRROR);
        h.push("camera", camera_meta(&default_camera()));
        h.push("screen_size", geometry_meta(&screen.geometry));
        let text = format!("{}0 1 2 3 4\n2 1 2 3 4\n", h.render());
        assert!(matches!(parse_mirror_dataset(&text), Err(IoError::Malformed { line: 5, .. })));
    }
}
