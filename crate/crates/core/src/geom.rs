//! Coordinate frames, pinhole camera, gaze rays and screen-plane geometry.
//!
//! Units are millimetres for lengths, degrees for reported angles and integer
//! microseconds for timestamps. The screen frame is fixed as x-right, y-down
//! with the display surface on its z = 0 plane.

use nalgebra::{Matrix3, Point2, Rotation3, Unit, Vector3};
use thiserror::Error;

use crate::scalar::{lit, rad_to_deg, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("invalid vector: {0}")]
    InvalidVector(&'static str),
    #[error("degenerate ray: origin and target coincide")]
    DegenerateRay,
    #[error("ray is parallel to the screen plane")]
    NoIntersection,
    #[error("intersection lies behind the ray origin (t = {0})")]
    BehindOrigin(f64),
    #[error("point lies behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid screen: {0}")]
    InvalidScreen(String),
}

/// A value tagged with whether it fell inside the screen's pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded<V> {
    pub value: V,
    pub in_bounds: bool,
}

/// Pinhole intrinsics (pixels). Lens distortion is assumed removed upstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics<T: Scalar> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width_px: u32,
    pub height_px: u32,
}

impl<T: Scalar> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width_px: u32, height_px: u32) -> Result<Self, GeomError> {
        let cam = Self { fx, fy, cx, cy, width_px, height_px };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let w: T = lit(self.width_px as f64);
        let h: T = lit(self.height_px as f64);
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(GeomError::InvalidIntrinsics(format!("focal lengths must be positive, got fx={} fy={}", self.fx, self.fy)));
        }
        if !(self.cx >= T::zero() && self.cx <= w && self.cy >= T::zero() && self.cy <= h) {
            return Err(GeomError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside sensor {}x{}",
                self.cx, self.cy, self.width_px, self.height_px
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<T> {
        let (z, o) = (T::zero(), T::one());
        Matrix3::new(self.fx, z, self.cx, z, self.fy, self.cy, z, z, o)
    }

    pub fn inverse_matrix(&self) -> Matrix3<T> {
        let (z, o) = (T::zero(), T::one());
        Matrix3::new(
            o / self.fx,
            z,
            -self.cx / self.fx,
            z,
            o / self.fy,
            -self.cy / self.fy,
            z,
            z,
            o,
        )
    }

    /// Perspective projection of a camera-frame point.
    pub fn project(&self, p: &Vector3<T>) -> Result<Point2<T>, GeomError> {
        if !(p.z > T::zero()) {
            return Err(GeomError::BehindCamera(p.z.to_f64_lossy()));
        }
        Ok(Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Unit direction of the camera ray through a pixel.
    pub fn pixel_ray(&self, px: &Point2<T>) -> Unit<Vector3<T>> {
        Unit::new_normalize(Vector3::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy, T::one()))
    }
}

/// Rigid motion `x -> rotation * x + translation` between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T: Scalar> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Scalar> RigidTransform<T> {
    /// Builds a transform, checking that `rotation` is a proper rotation.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self, GeomError> {
        let tf = Self { rotation, translation };
        tf.check_rotation(T::invariant_tol())?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidVector("translation must be finite"));
        }
        Ok(tf)
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    /// Rotation given as axis * angle (radians).
    pub fn from_scaled_axis(scaled_axis: Vector3<T>, translation: Vector3<T>) -> Self {
        Self { rotation: Rotation3::new(scaled_axis).into_inner(), translation }
    }

    pub fn check_rotation(&self, tol: T) -> Result<(), GeomError> {
        let r = &self.rotation;
        if !r.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidRotation("non-finite entries".into()));
        }
        let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
        if ortho > tol {
            return Err(GeomError::InvalidRotation(format!("R^T R deviates from I by {ortho}")));
        }
        let det = r.determinant();
        if (det - T::one()).abs() > tol {
            return Err(GeomError::InvalidRotation(format!("determinant {det} != +1")));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Angle (degrees) of the relative rotation between two transforms.
    pub fn rotation_error_deg(&self, other: &Self) -> T {
        rotation_angle_deg(&(self.rotation.transpose() * other.rotation))
    }

    pub fn translation_error(&self, other: &Self) -> T {
        (self.translation - other.translation).norm()
    }
}

/// Rotation angle (degrees) of a rotation matrix, computed stably for small angles.
pub fn rotation_angle_deg<T: Scalar>(r: &Matrix3<T>) -> T {
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin2 = skew.norm();
    let cos2 = r.trace() - T::one();
    rad_to_deg(sin2.atan2(cos2))
}

/// Nearest proper rotation in the Frobenius sense (polar decomposition via SVD).
pub fn nearest_rotation<T: Scalar>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < T::zero() {
        d[(2, 2)] = -T::one();
    }
    u * d * v_t
}

/// Normalizes `v`, rejecting zero-length and non-finite input.
pub fn normalize_checked<T: Scalar>(v: &Vector3<T>) -> Result<Vector3<T>, GeomError> {
    let n = v.norm();
    if !n.is_finite() {
        return Err(GeomError::InvalidVector("non-finite vector"));
    }
    if n <= T::default_epsilon() * T::default_epsilon() {
        return Err(GeomError::InvalidVector("zero-length vector"));
    }
    Ok(v / n)
}

/// Gaze ray anchored at `origin` (camera frame, mm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample<T: Scalar> {
    pub origin: Vector3<T>,
    direction: Vector3<T>,
    pub timestamp_us: i64,
}

impl<T: Scalar> GazeSample<T> {
    /// Normalizes `direction`; rejects zero or non-finite input.
    pub fn new(origin: Vector3<T>, direction: Vector3<T>, timestamp_us: i64) -> Result<Self, GeomError> {
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidVector("non-finite ray origin"));
        }
        let direction = normalize_checked(&direction)?;
        Ok(Self { origin, direction, timestamp_us })
    }

    /// Stores an already-unit `direction` verbatim (no renormalization).
    pub fn from_unit(origin: Vector3<T>, direction: Vector3<T>, timestamp_us: i64) -> Result<Self, GeomError> {
        if !origin.iter().all(|v| v.is_finite()) || !direction.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidVector("non-finite gaze ray"));
        }
        if (direction.norm() - T::one()).abs() > T::invariant_tol() {
            return Err(GeomError::InvalidVector("direction is not unit length"));
        }
        Ok(Self { origin, direction, timestamp_us })
    }

    pub fn direction(&self) -> &Vector3<T> {
        &self.direction
    }

    pub fn point_at(&self, t: T) -> Vector3<T> {
        self.origin + self.direction * t
    }
}

/// Physical size and resolution of a display.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenGeometry<T: Scalar> {
    pub width_mm: T,
    pub height_mm: T,
    pub width_px: u32,
    pub height_px: u32,
}

impl<T: Scalar> ScreenGeometry<T> {
    pub fn new(width_mm: T, height_mm: T, width_px: u32, height_px: u32) -> Result<Self, GeomError> {
        let g = Self { width_mm, height_mm, width_px, height_px };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.width_mm > T::zero() && self.height_mm > T::zero()) || self.width_px == 0 || self.height_px == 0 {
            return Err(GeomError::InvalidScreen("all screen dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn mm_per_px(&self) -> (T, T) {
        (self.width_mm / lit(self.width_px as f64), self.height_mm / lit(self.height_px as f64))
    }

    /// Pixel coordinates to millimetres on the screen plane (screen frame, z = 0).
    pub fn px_to_mm(&self, p: &Point2<T>) -> Vector3<T> {
        let (sx, sy) = self.mm_per_px();
        Vector3::new(p.x * sx, p.y * sy, T::zero())
    }

    pub fn mm_to_px(&self, x_mm: T, y_mm: T) -> Point2<T> {
        let (sx, sy) = self.mm_per_px();
        Point2::new(x_mm / sx, y_mm / sy)
    }

    pub fn contains_px(&self, p: &Point2<T>) -> bool {
        let w: T = lit(self.width_px as f64);
        let h: T = lit(self.height_px as f64);
        p.x >= T::zero() && p.x <= w && p.y >= T::zero() && p.y <= h
    }
}

/// A display placed in the camera frame. `pose` maps screen-frame mm to camera-frame mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenModel<T: Scalar> {
    pub pose: RigidTransform<T>,
    pub geometry: ScreenGeometry<T>,
}

impl<T: Scalar> ScreenModel<T> {
    pub fn new(pose: RigidTransform<T>, geometry: ScreenGeometry<T>) -> Result<Self, GeomError> {
        pose.check_rotation(T::invariant_tol())?;
        geometry.validate()?;
        Ok(Self { pose, geometry })
    }

    /// Screen-plane normal expressed in the camera frame.
    pub fn normal(&self) -> Vector3<T> {
        self.pose.rotation.column(2).into_owned()
    }
}

/// Angle in degrees between two directions. Symmetric; range [0, 180].
///
/// Evaluated as `atan2(|a×b|, a·b)`, which equals the arccos of the clamped
/// normalized dot product but stays accurate near 0° and 180°.
pub fn angular_error<T: Scalar>(a: &Vector3<T>, b: &Vector3<T>) -> Result<T, GeomError> {
    let a = normalize_checked(a)?;
    let b = normalize_checked(b)?;
    let sin = a.cross(&b).norm();
    let cos = a.dot(&b).clamp(-T::one(), T::one());
    Ok(rad_to_deg(sin.atan2(cos)))
}

/// Lifts a screen pixel to a camera-frame 3D point. Out-of-bounds pixels are allowed and flagged.
pub fn screen_px_to_camera_3d<T: Scalar>(p: &Point2<T>, screen: &ScreenModel<T>) -> Bounded<Vector3<T>> {
    let local = screen.geometry.px_to_mm(p);
    Bounded { value: screen.pose.apply(&local), in_bounds: screen.geometry.contains_px(p) }
}

/// Gaze ray from the face centre towards a 3D target.
pub fn gaze_from_target<T: Scalar>(
    face_center: &Vector3<T>,
    target: &Vector3<T>,
    timestamp_us: i64,
) -> Result<GazeSample<T>, GeomError> {
    let d = target - face_center;
    if d.norm() <= T::default_epsilon() * (T::one() + face_center.norm()) {
        return Err(GeomError::DegenerateRay);
    }
    GazeSample::new(*face_center, d, timestamp_us)
}

/// Intersects a gaze ray with the screen plane and returns the hit in screen pixels.
/// Off-screen hits are returned unclipped and flagged.
pub fn intersect_ray_screen<T: Scalar>(g: &GazeSample<T>, screen: &ScreenModel<T>) -> Result<Bounded<Point2<T>>, GeomError> {
    let n = screen.normal();
    let denom = n.dot(g.direction());
    if denom.abs() <= T::default_epsilon() * lit(64.0) {
        return Err(GeomError::NoIntersection);
    }
    let t = n.dot(&(screen.pose.translation - g.origin)) / denom;
    if !(t > T::zero()) {
        return Err(GeomError::BehindOrigin(t.to_f64_lossy()));
    }
    let hit = g.point_at(t);
    let local = screen.pose.rotation.transpose() * (hit - screen.pose.translation);
    let px = screen.geometry.mm_to_px(local.x, local.y);
    Ok(Bounded { in_bounds: screen.geometry.contains_px(&px), value: px })
}

/// Mean of the two per-eye screen intersections.
pub fn midpoint_gaze_point<T: Scalar>(
    left: &GazeSample<T>,
    right: &GazeSample<T>,
    screen: &ScreenModel<T>,
) -> Result<Bounded<Point2<T>>, GeomError> {
    let l = intersect_ray_screen(left, screen)?.value;
    let r = intersect_ray_screen(right, screen)?.value;
    let half: T = lit(0.5);
    let mid = Point2::new((l.x + r.x) * half, (l.y + r.y) * half);
    Ok(Bounded { in_bounds: screen.geometry.contains_px(&mid), value: mid })
}
