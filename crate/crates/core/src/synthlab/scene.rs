use nalgebra::{Matrix3, Point2, Rotation3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::{Condition, RegionSpec, SceneConfig, SynthError, APPEARANCE_SOURCE, TIMESTEP_US, TRACKER_SOURCE};
use crate::estimators::{EstimateRecord, Payload, PayloadKind};
use crate::geom::{
    gaze_from_target, intersect_ray_screen, screen_px_to_camera_3d, CameraIntrinsics, GazeSample, RigidTransform, ScreenModel,
};
use crate::headpose::{face_center, reproject, FaceModel3D, LandmarkSet, NUM_LANDMARKS};
use crate::session::{ClickEvent, EstimateStream, SessionLog, SessionMetadata};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSample {
    pub timestamp_us: i64,
    pub target_px: Point2<f64>,
    pub target_cam: Vector3<f64>,
    pub head_pose: RigidTransform<f64>,
    pub face_center: Vector3<f64>,
    /// Exactly `normalize(target_cam - face_center)` from `face_center`.
    pub gaze: GazeSample<f64>,
    /// Observed landmarks: clean projection plus `landmark_noise` / `iris_noise`.
    pub landmarks: LandmarkSet<f64>,
    pub landmark_noise: [Vector2<f64>; NUM_LANDMARKS],
    pub iris_noise: [Vector2<f64>; 2],
    /// Simulated appearance-method output direction.
    pub appearance_direction: Vector3<f64>,
}

/// Axis-aligned stimulus region in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetRegion {
    pub top_left_px: Point2<f64>,
    pub width_px: f64,
    pub height_px: f64,
    /// Nominal face centre the region was laid out for.
    pub viewpoint: Vector3<f64>,
}

impl TargetRegion {
    pub fn center_px(&self) -> Point2<f64> {
        Point2::new(self.top_left_px.x + self.width_px / 2.0, self.top_left_px.y + self.height_px / 2.0)
    }

    /// (horizontal, vertical) visual angle across the region's mid-lines.
    pub fn visual_angles_deg(&self, screen: &ScreenModel<f64>) -> (f64, f64) {
        let c = self.center_px();
        let (l, r) = (Point2::new(self.top_left_px.x, c.y), Point2::new(self.top_left_px.x + self.width_px, c.y));
        let (t, b) = (Point2::new(c.x, self.top_left_px.y), Point2::new(c.x, self.top_left_px.y + self.height_px));
        (visual_angle_deg(&self.viewpoint, &l, &r, screen), visual_angle_deg(&self.viewpoint, &t, &b, screen))
    }
}

/// Angle subtended at `eye` by two screen pixels.
pub fn visual_angle_deg(eye: &Vector3<f64>, a: &Point2<f64>, b: &Point2<f64>, screen: &ScreenModel<f64>) -> f64 {
    let pa = screen_px_to_camera_3d(a, screen).value - eye;
    let pb = screen_px_to_camera_3d(b, screen).value - eye;
    pa.cross(&pb).norm().atan2(pa.dot(&pb)).to_degrees()
}

/// Smallest `x` in `[0, hi]` with `f(x) >= goal`, for increasing `f`.
fn bisect(f: impl Fn(f64) -> f64, goal: f64, hi: f64) -> Option<f64> {
    if f(hi) < goal {
        return None;
    }
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Region centred horizontally, bottom edge `region_margin_mm` above the screen's bottom edge.
pub fn target_region(cfg: &SceneConfig, screen: &ScreenModel<f64>) -> Result<TargetRegion, SynthError> {
    cfg.validate()?;
    let g = &screen.geometry;
    let (sx, sy) = g.mm_per_px();
    let (w_screen, h_screen) = (g.width_px as f64, g.height_px as f64);
    let bottom = h_screen - cfg.region_margin_mm / sy;
    let cx = w_screen / 2.0;
    let viewpoint = Vector3::new(0.0, 0.0, cfg.distance_mm);
    let too_big = |w: f64, h: f64| SynthError::RegionExceedsScreen { width_mm: w * sx, height_mm: h * sy };
    let (w, h) = match cfg.region {
        RegionSpec::Millimetres { width_mm, height_mm } => (width_mm / sx, height_mm / sy),
        RegionSpec::VisualAngle { width_deg, height_deg } => {
            let v_angle =
                |h: f64| visual_angle_deg(&viewpoint, &Point2::new(cx, bottom - h), &Point2::new(cx, bottom), screen);
            let h = bisect(v_angle, height_deg, bottom.max(0.0)).ok_or_else(|| too_big(0.0, bottom + 1.0))?;
            let cy = bottom - h / 2.0;
            let h_angle = |w: f64| {
                visual_angle_deg(&viewpoint, &Point2::new(cx - w / 2.0, cy), &Point2::new(cx + w / 2.0, cy), screen)
            };
            let w = bisect(h_angle, width_deg, w_screen).ok_or_else(|| too_big(w_screen + 1.0, h))?;
            (w, h)
        }
    };
    if w > w_screen || h > bottom || bottom <= 0.0 {
        return Err(too_big(w, h));
    }
    Ok(TargetRegion { top_left_px: Point2::new(cx - w / 2.0, bottom - h), width_px: w, height_px: h, viewpoint })
}

/// Head rotation whose forward direction (head −z) points along `forward`, head y kept near camera y.
fn facing_rotation(forward: &Vector3<f64>) -> Matrix3<f64> {
    let z = -forward.normalize();
    let x = Vector3::y().cross(&z).normalize();
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

fn normal2(rng: &mut ChaCha20Rng, sigma: f64) -> Vector2<f64> {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Vector2::new(a, b) * sigma
}

/// Rotates `d` by a random tangent offset whose RMS angle is `sigma_rad`.
fn perturb_direction(d: &Vector3<f64>, offset: Vector2<f64>) -> Vector3<f64> {
    let helper = if d.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
    let e1 = d.cross(&helper).normalize();
    let e2 = d.cross(&e1);
    let theta = offset.norm();
    if theta == 0.0 {
        return *d;
    }
    let t = (e1 * offset.x + e2 * offset.y) / theta;
    (d * theta.cos() + t * theta.sin()).normalize()
}

struct NoiseLevels {
    landmark: f64,
    iris: f64,
    bias: [Vector2<f64>; NUM_LANDMARKS],
}

fn noise_levels(cfg: &SceneConfig) -> NoiseLevels {
    let f = cfg.factors;
    let mut lv = NoiseLevels { landmark: cfg.landmark_noise_px, iris: cfg.iris_noise_px, bias: [Vector2::zeros(); NUM_LANDMARKS] };
    match cfg.condition {
        Condition::Indoor => {}
        Condition::Outdoor => {
            lv.landmark *= f.outdoor_noise_factor;
            lv.iris *= f.outdoor_noise_factor;
        }
        Condition::Glasses => {
            lv.iris *= f.glasses_iris_factor;
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(u64::MAX);
            for b in &mut lv.bias {
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                *b = Vector2::new(phi.cos(), phi.sin()) * f.glasses_bias_px;
            }
        }
    }
    lv
}

/// Deterministic session plus per-sample ground truth.
pub fn generate_session(
    cfg: &SceneConfig,
    model: &FaceModel3D<f64>,
    cam: &CameraIntrinsics<f64>,
    screen: &ScreenModel<f64>,
) -> Result<(SessionLog<f64>, Vec<GroundTruthSample>), SynthError> {
    cfg.validate()?;
    cam.validate()?;
    model.validate().map_err(|e| SynthError::Config(e.to_string()))?;
    let region = target_region(cfg, screen)?;
    let levels = noise_levels(cfg);
    let region_center = screen_px_to_camera_3d(&region.center_px(), screen).value;
    let (bias_yaw, bias_pitch) = (cfg.direction_bias_deg.0.to_radians(), cfg.direction_bias_deg.1.to_radians());
    let bias_rot = Rotation3::from_axis_angle(&Vector3::y_axis(), bias_yaw) * Rotation3::from_axis_angle(&Vector3::x_axis(), bias_pitch);
    let dir_sigma = cfg.direction_noise_deg.to_radians() / 2f64.sqrt();
    let (jy, jp, jr) = cfg.head_jitter_deg;
    let centroid = model.centroid();

    let mut truth = Vec::with_capacity(cfg.n_samples);
    let mut landmarks = Vec::with_capacity(cfg.n_samples);
    let mut clicks = Vec::with_capacity(cfg.n_samples);
    let mut appearance = Vec::with_capacity(cfg.n_samples);
    let mut tracker = Vec::new();
    let uniform = |rng: &mut ChaCha20Rng, half: f64| if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };

    for i in 0..cfg.n_samples {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let ts = cfg.start_timestamp_us + i as i64 * TIMESTEP_US;

        let target_px = Point2::new(
            region.top_left_px.x + rng.random::<f64>() * region.width_px,
            region.top_left_px.y + rng.random::<f64>() * region.height_px,
        );
        let target_cam = screen_px_to_camera_3d(&target_px, screen).value;

        let face_pos = Vector3::new(
            uniform(&mut rng, cfg.position_jitter_mm),
            uniform(&mut rng, cfg.position_jitter_mm),
            cfg.distance_mm,
        );
        let yaw = uniform(&mut rng, jy).to_radians();
        let pitch = uniform(&mut rng, jp).to_radians();
        let roll = uniform(&mut rng, jr).to_radians();
        let jitter = Rotation3::from_axis_angle(&Vector3::y_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::x_axis(), pitch)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), roll);
        let rotation = facing_rotation(&(region_center - face_pos)) * jitter.into_inner();
        let head_pose = RigidTransform { rotation, translation: face_pos - rotation * centroid };
        let fc = face_center(&head_pose, model);
        let gaze = gaze_from_target(&fc, &target_cam, ts)?;

        let clean = reproject(model, &head_pose, cam)?;
        let mut landmark_noise = [Vector2::zeros(); NUM_LANDMARKS];
        let mut points = clean;
        for k in 0..NUM_LANDMARKS {
            landmark_noise[k] = normal2(&mut rng, levels.landmark) + levels.bias[k];
            points[k] += landmark_noise[k];
        }
        let mut iris_noise = [Vector2::zeros(); 2];
        let mut iris = [Point2::origin(); 2];
        for k in 0..2 {
            let c = head_pose.apply(&model.eyeball_centers[k]);
            let pupil = c + (target_cam - c).normalize() * model.eyeball_radius;
            iris_noise[k] = normal2(&mut rng, levels.iris);
            iris[k] = cam.project(&pupil)? + iris_noise[k];
        }
        let lm = LandmarkSet { points, iris_centers: Some(iris), timestamp_us: ts };

        let biased = bias_rot * gaze.direction();
        let appearance_direction = perturb_direction(&biased, normal2(&mut rng, dir_sigma));
        appearance.push(EstimateRecord {
            timestamp_us: ts,
            source_id: APPEARANCE_SOURCE.into(),
            payload: Payload::Direction(appearance_direction),
        });
        if cfg.emit_tracker_2d {
            let ray = GazeSample::new(fc, appearance_direction, ts)?;
            if let Ok(hit) = intersect_ray_screen(&ray, screen) {
                tracker.push(EstimateRecord {
                    timestamp_us: ts,
                    source_id: TRACKER_SOURCE.into(),
                    payload: Payload::ScreenPoint(hit.value),
                });
            }
        }

        clicks.push(ClickEvent { timestamp_us: ts, target_px });
        landmarks.push(lm.clone());
        truth.push(GroundTruthSample {
            timestamp_us: ts,
            target_px,
            target_cam,
            head_pose,
            face_center: fc,
            gaze,
            landmarks: lm,
            landmark_noise,
            iris_noise,
            appearance_direction,
        });
    }

    let mut estimates = vec![EstimateStream { source_id: APPEARANCE_SOURCE.into(), kind: PayloadKind::Direction, records: appearance }];
    if cfg.emit_tracker_2d {
        estimates.push(EstimateStream { source_id: TRACKER_SOURCE.into(), kind: PayloadKind::ScreenPoint, records: tracker });
    }
    let metadata = SessionMetadata {
        participant_id: cfg.participant_id.clone(),
        condition_tag: cfg.condition.as_str().into(),
        distance_mm: cfg.distance_mm,
        screen: *screen,
        intrinsics: *cam,
        extra: vec![("generator".into(), "synthlab-chacha20".into()), ("seed".into(), cfg.seed.to_string())],
    };
    Ok((SessionLog { metadata, landmarks, estimates, clicks }, truth))
}
