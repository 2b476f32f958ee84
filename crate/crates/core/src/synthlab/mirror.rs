use nalgebra::{Point2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::SynthError;
use crate::calibration::{MirrorObservation, MirrorPlane};
use crate::geom::{CameraIntrinsics, ScreenGeometry, ScreenModel};

/// Mirror image of a screen. The pose is stored as a proper transform that
/// agrees with the reflection on the screen plane; `handedness_inverted`
/// records that the true image is mirrored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectedScreen {
    pub screen: ScreenModel<f64>,
    pub handedness_inverted: bool,
}

pub fn reflect_scene(screen: &ScreenModel<f64>, point: &Vector3<f64>, normal: &Vector3<f64>) -> Result<ReflectedScreen, SynthError> {
    let plane = MirrorPlane::from_point_normal(point, normal).ok_or(SynthError::ZeroNormal)?;
    if plane.distance.abs() <= 1e-9 * (1.0 + point.norm()) {
        return Err(SynthError::CameraOnMirror);
    }
    let pose = plane.reflect_pose(&screen.pose);
    Ok(ReflectedScreen { screen: ScreenModel { pose, geometry: screen.geometry }, handedness_inverted: true })
}

/// Virtual pattern centres used to place the standard mirrors (camera frame, mm).
const VIRTUAL_CENTRES: [[f64; 3]; 5] =
    [[0.0, 0.0, 1200.0], [350.0, 0.0, 1100.0], [-350.0, 50.0, 1100.0], [0.0, 300.0, 1150.0], [200.0, -250.0, 1000.0]];

/// Up to five mirrors in front of the camera with pairwise distinct, non-coplanar normals.
pub fn standard_mirrors(screen: &ScreenModel<f64>, count: usize) -> Result<Vec<MirrorPlane<f64>>, SynthError> {
    if !(1..=VIRTUAL_CENTRES.len()).contains(&count) {
        return Err(SynthError::Config(format!("between 1 and {} standard mirrors are available", VIRTUAL_CENTRES.len())));
    }
    let g = &screen.geometry;
    let centre = screen.pose.apply(&g.px_to_mm(&Point2::new(g.width_px as f64 / 2.0, g.height_px as f64 / 2.0)));
    VIRTUAL_CENTRES[..count]
        .iter()
        .map(|v| MirrorPlane::bisecting(&centre, &Vector3::new(v[0], v[1], v[2])).ok_or(SynthError::ZeroNormal))
        .collect()
}

/// Inner-corner grid of a checkerboard filling the central 60% of the screen.
pub fn checker_pattern(geometry: &ScreenGeometry<f64>, cols: usize, rows: usize) -> Vec<Point2<f64>> {
    let (w, h) = (geometry.width_px as f64, geometry.height_px as f64);
    let step = |n: usize, extent: f64| if n > 1 { 0.6 * extent / (n - 1) as f64 } else { 0.0 };
    let (dx, dy) = (step(cols, w), step(rows, h));
    let (x0, y0) = (w / 2.0 - dx * (cols.saturating_sub(1)) as f64 / 2.0, h / 2.0 - dy * (rows.saturating_sub(1)) as f64 / 2.0);
    (0..rows).flat_map(|r| (0..cols).map(move |c| Point2::new(x0 + c as f64 * dx, y0 + r as f64 * dy))).collect()
}

/// Projects the reflected pattern and adds isotropic Gaussian corner noise.
pub fn observe_pattern(
    screen: &ScreenModel<f64>,
    mirror: &MirrorPlane<f64>,
    cam: &CameraIntrinsics<f64>,
    pattern: &[Point2<f64>],
    noise_px: f64,
    rng: &mut impl Rng,
) -> Result<MirrorObservation<f64>, SynthError> {
    let mut corners = Vec::with_capacity(pattern.len());
    for p in pattern {
        let x = mirror.reflect_point(&screen.pose.apply(&screen.geometry.px_to_mm(p)));
        let mut px = cam.project(&x)?;
        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
        px.x += a * noise_px;
        px.y += b * noise_px;
        corners.push(px);
    }
    Ok(MirrorObservation { pattern_corners_px: corners, pattern_geometry: pattern.to_vec() })
}

/// Seeded observations through the given mirrors; observation `k` uses stream `k`.
pub fn mirror_observations(
    screen: &ScreenModel<f64>,
    mirrors: &[MirrorPlane<f64>],
    cam: &CameraIntrinsics<f64>,
    pattern: &[Point2<f64>],
    noise_px: f64,
    seed: u64,
) -> Result<Vec<MirrorObservation<f64>>, SynthError> {
    mirrors
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            observe_pattern(screen, m, cam, pattern, noise_px, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::solve_reflected_pose;
    use crate::synthlab::{default_camera, default_screen};

    #[test]
    fn axis_aligned_mirror_reflects_depth() {
        let screen = default_screen();
        let r = reflect_scene(&screen, &Vector3::new(0.0, 0.0, 500.0), &Vector3::new(0.0, 0.0, 2.0)).unwrap();
        let t = r.screen.pose.translation;
        assert_eq!(t.z, 1000.0 - screen.pose.translation.z);
        assert_eq!((t.x, t.y), (screen.pose.translation.x, screen.pose.translation.y));
        assert!(r.handedness_inverted);
    }

    #[test]
    fn double_reflection_is_identity() {
        let screen = default_screen();
        let (p, n) = (Vector3::new(20.0, -40.0, 600.0), Vector3::new(0.2, -0.3, 1.0));
        let once = reflect_scene(&screen, &p, &n).unwrap();
        let twice = reflect_scene(&once.screen, &p, &n).unwrap();
        assert!((twice.screen.pose.rotation - screen.pose.rotation).abs().max() < 1e-12);
        assert!((twice.screen.pose.translation - screen.pose.translation).abs().max() < 1e-12 * 1e3);
    }

    #[test]
    fn degenerate_mirrors_rejected() {
        let screen = default_screen();
        assert_eq!(reflect_scene(&screen, &Vector3::new(0.0, 0.0, 500.0), &Vector3::zeros()), Err(SynthError::ZeroNormal));
        assert_eq!(reflect_scene(&screen, &Vector3::new(0.0, 5.0, 0.0), &Vector3::z()), Err(SynthError::CameraOnMirror));
    }

    #[test]
    fn reflected_corners_close_the_loop() {
        let screen = default_screen();
        let cam = default_camera();
        let pattern = checker_pattern(&screen.geometry, 9, 6);
        let mirrors = standard_mirrors(&screen, 5).unwrap();
        let obs = mirror_observations(&screen, &mirrors, &cam, &pattern, 0.0, 0).unwrap();
        for (o, m) in obs.iter().zip(&mirrors) {
            let n = m.normal;
            let virt = reflect_scene(&screen, &(n * m.distance), &n).unwrap().screen;
            for (px, corner) in o.pattern_geometry.iter().zip(&o.pattern_corners_px) {
                let p = cam.project(&virt.pose.apply(&virt.geometry.px_to_mm(px))).unwrap();
                assert!((p - corner).norm() < 1e-9);
            }
            let pose = solve_reflected_pose(o, &cam, &screen.geometry).unwrap();
            assert!(pose.rotation_error_deg(&virt.pose) < 1e-6);
        }
    }
}
