//! Screen-to-camera extrinsics from a calibration pattern seen through planar mirrors.
//!
//! The reflection of the screen in a mirror with unit normal `n` and offset `d`
//! (plane `n·x = d`) is the improper map `x -> D x + 2 d n`, `D = I - 2 n nᵀ`.
//! Virtual poses are stored as proper transforms `(D R F, D t + 2 d n)` with
//! `F = diag(1, 1, -1)`; both agree on the pattern plane `z = 0`, so they are
//! what a planar pose solver recovers from the reflected corners.

use nalgebra::{DMatrix, DVector, Matrix3, Point2, Rotation3, Vector3};

use super::CalibrationError;
use crate::geom::{nearest_rotation, rotation_angle_deg, CameraIntrinsics, RigidTransform, ScreenGeometry, ScreenModel};
use crate::lm::{self, LeastSquaresProblem, LmConfig, LmReport};
use crate::pnp::refine_pose;
use crate::scalar::{lit, Scalar};

/// Smallest accepted angle between any two mirror normals.
pub const MIN_MIRROR_ANGLE_DEG: f64 = 5.0;
/// Largest accepted condition number of the linear stages.
pub const MAX_CONDITION: f64 = 1e8;

/// One capture of the on-screen pattern reflected in a mirror.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorObservation<T: Scalar> {
    /// Detected corners in the camera image.
    pub pattern_corners_px: Vec<Point2<T>>,
    /// The same corners in screen pixel coordinates.
    pub pattern_geometry: Vec<Point2<T>>,
}

impl<T: Scalar> MirrorObservation<T> {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let n = self.pattern_geometry.len();
        if n != self.pattern_corners_px.len() {
            return Err(CalibrationError::LengthMismatch { geometry: n, detected: self.pattern_corners_px.len() });
        }
        if n < 4 {
            return Err(CalibrationError::InsufficientData { required: 4, actual: n });
        }
        let finite = |p: &Point2<T>| p.x.is_finite() && p.y.is_finite();
        if !self.pattern_geometry.iter().chain(&self.pattern_corners_px).all(finite) {
            return Err(CalibrationError::NonFinite);
        }
        if collinear(&self.pattern_geometry) || collinear(&self.pattern_corners_px) {
            return Err(CalibrationError::Collinear);
        }
        Ok(())
    }
}

fn collinear<T: Scalar>(pts: &[Point2<T>]) -> bool {
    let n: T = lit(pts.len() as f64);
    let c = pts.iter().fold(nalgebra::Vector2::zeros(), |s, p| s + p.coords) / n;
    let mut cov = nalgebra::Matrix2::zeros();
    for p in pts {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let ev = cov.symmetric_eigenvalues();
    let (lo, hi) = (ev[0].min(ev[1]), ev[0].max(ev[1]));
    !(hi > T::zero()) || lo <= hi * lit(1e-12)
}

/// Mirror plane `normal · x = distance` in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorPlane<T: Scalar> {
    pub normal: Vector3<T>,
    pub distance: T,
}

impl<T: Scalar> MirrorPlane<T> {
    /// Plane through `point` with the given (not necessarily unit) normal.
    pub fn from_point_normal(point: &Vector3<T>, normal: &Vector3<T>) -> Option<Self> {
        let len = normal.norm();
        if !(len > T::zero()) || !len.is_finite() {
            return None;
        }
        let normal = normal / len;
        Some(Self { normal, distance: normal.dot(point) })
    }

    /// Perpendicular bisector of `a` and `b`, normal pointing from `a` to `b`.
    pub fn bisecting(a: &Vector3<T>, b: &Vector3<T>) -> Option<Self> {
        let d = b - a;
        let len = d.norm();
        if !(len > T::zero()) {
            return None;
        }
        let normal = d / len;
        let half: T = lit(0.5);
        Some(Self { normal, distance: normal.dot(&((a + b) * half)) })
    }

    pub fn householder(&self) -> Matrix3<T> {
        Matrix3::identity() - self.normal * self.normal.transpose() * lit::<T>(2.0)
    }

    pub fn reflect_point(&self, p: &Vector3<T>) -> Vector3<T> {
        p - self.normal * ((self.normal.dot(p) - self.distance) * lit(2.0))
    }

    /// Proper transform that maps pattern-plane points to their mirror images.
    pub fn reflect_pose(&self, pose: &RigidTransform<T>) -> RigidTransform<T> {
        let rotation = self.householder() * pose.rotation * flip_z();
        RigidTransform { rotation, translation: self.reflect_point(&pose.translation) }
    }
}

fn flip_z<T: Scalar>() -> Matrix3<T> {
    Matrix3::from_diagonal(&Vector3::new(T::one(), T::one(), -T::one()))
}

#[derive(Debug, Clone, Copy)]
pub struct MirrorConfig<T: Scalar> {
    pub lm: LmConfig<T>,
    pub min_angle_deg: T,
    pub max_condition: T,
}

impl<T: Scalar> Default for MirrorConfig<T> {
    fn default() -> Self {
        Self {
            lm: LmConfig { max_iterations: 100, ..LmConfig::default() },
            min_angle_deg: lit(MIN_MIRROR_ANGLE_DEG),
            max_condition: lit(MAX_CONDITION),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorCalibration<T: Scalar> {
    pub screen: ScreenModel<T>,
    /// One plane per observation, in input order.
    pub mirrors: Vec<MirrorPlane<T>>,
    /// Closed-form screen pose before joint refinement.
    pub linear_pose: RigidTransform<T>,
    pub rms_reprojection_px: T,
    pub report: LmReport<T>,
}

/// Similarity that moves the centroid to the origin and the mean distance to √2.
fn hartley<T: Scalar>(pts: &[Point2<T>]) -> Matrix3<T> {
    let n: T = lit(pts.len() as f64);
    let c = pts.iter().fold(nalgebra::Vector2::zeros(), |s, p| s + p.coords) / n;
    let mean = pts.iter().fold(T::zero(), |s, p| s + (p.coords - c).norm()) / n;
    let s = if mean > T::zero() { lit::<T>(2f64.sqrt()) / mean } else { T::one() };
    Matrix3::new(s, T::zero(), -s * c.x, T::zero(), s, -s * c.y, T::zero(), T::zero(), T::one())
}

fn apply_h<T: Scalar>(h: &Matrix3<T>, p: &Point2<T>) -> Point2<T> {
    let q = h * Vector3::new(p.x, p.y, T::one());
    Point2::new(q.x / q.z, q.y / q.z)
}

/// Index of the smallest singular value (nalgebra does not sort them).
fn argmin<T: Scalar>(v: &DVector<T>) -> usize {
    v.iter().enumerate().fold(0, |best, (i, x)| if *x < v[best] { i } else { best })
}

/// Normalized DLT homography mapping `src` onto `dst`.
pub fn homography_dlt<T: Scalar>(src: &[Point2<T>], dst: &[Point2<T>]) -> Result<Matrix3<T>, CalibrationError> {
    if src.len() != dst.len() {
        return Err(CalibrationError::LengthMismatch { geometry: src.len(), detected: dst.len() });
    }
    if src.len() < 4 {
        return Err(CalibrationError::InsufficientData { required: 4, actual: src.len() });
    }
    let ts = hartley(src);
    let td = hartley(dst);
    // Pad to at least 9 rows so the thin SVD exposes the full right null space.
    let rows = (2 * src.len()).max(9);
    let mut a = DMatrix::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let s = apply_h(&ts, s);
        let d = apply_h(&td, d);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let o = T::zero();
        let one = T::one();
        let r0 = [-x, -y, -one, o, o, o, u * x, u * y, u];
        let r1 = [o, o, o, -x, -y, -one, v * x, v * y, v];
        for k in 0..9 {
            a[(2 * i, k)] = r0[k];
            a[(2 * i + 1, k)] = r1[k];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(CalibrationError::DegenerateHomography)?;
    let sv = &svd.singular_values;
    let k = argmin(sv);
    let mut sorted: Vec<T> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    // A unique solution needs a one-dimensional null space.
    if !(sorted[1] > sorted[8] * lit(1e-10)) {
        return Err(CalibrationError::DegenerateHomography);
    }
    let h = v_t.row(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(CalibrationError::DegenerateHomography)?;
    let hm = td_inv * hn * ts;
    if !hm.iter().all(|x| x.is_finite()) {
        return Err(CalibrationError::DegenerateHomography);
    }
    Ok(hm)
}

/// Pose of the reflected pattern (virtual pattern frame → camera), as observed.
pub fn solve_reflected_pose<T: Scalar>(
    obs: &MirrorObservation<T>,
    cam: &CameraIntrinsics<T>,
    geometry: &ScreenGeometry<T>,
) -> Result<RigidTransform<T>, CalibrationError> {
    obs.validate()?;
    cam.validate()?;
    let object_2d: Vec<Point2<T>> = obs
        .pattern_geometry
        .iter()
        .map(|p| {
            let m = geometry.px_to_mm(p);
            Point2::new(m.x, m.y)
        })
        .collect();
    let h = homography_dlt(&object_2d, &obs.pattern_corners_px)?;
    let m = cam.inverse_matrix() * h;
    let (m1, m2, m3) = (m.column(0).into_owned(), m.column(1).into_owned(), m.column(2).into_owned());
    let denom = m1.norm() + m2.norm();
    if !(denom > T::zero()) {
        return Err(CalibrationError::DegenerateHomography);
    }
    let mut lambda = lit::<T>(2.0) / denom;
    if m3.z * lambda < T::zero() {
        lambda = -lambda;
    }
    let r1 = m1 * lambda;
    let r2 = m2 * lambda;
    let r3 = r1.cross(&r2);
    let approx = Matrix3::from_columns(&[r1, r2, r3]);
    let init = RigidTransform { rotation: nearest_rotation(&approx), translation: m3 * lambda };
    let object: Vec<Vector3<T>> = object_2d.iter().map(|p| Vector3::new(p.x, p.y, T::zero())).collect();
    let (pose, _) = refine_pose(&object, &obs.pattern_corners_px, cam, &init, &LmConfig::default())?;
    Ok(pose)
}

/// Right singular vector of the smallest singular value, with the ratio
/// `σ_max / σ_second` that measures how well that null direction is isolated.
fn null_vector<T: Scalar>(rows: &[Vector3<T>]) -> (Vector3<T>, T) {
    let mut m = DMatrix::zeros(rows.len().max(3), 3);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("svd v_t");
    let sv = &svd.singular_values;
    let k = argmin(sv);
    let mut sorted: Vec<T> = sv.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let cond = if sorted[1] > T::zero() { sorted[2] / sorted[1] } else { T::max_value().unwrap_or(lit(f64::MAX)) };
    let v = v_t.row(k);
    (Vector3::new(v[0], v[1], v[2]), cond)
}

struct JointProblem<'a, T: Scalar> {
    /// Screen-frame corner positions (mm, z = 0) for each observation.
    object: Vec<Vec<Vector3<T>>>,
    observations: &'a [MirrorObservation<T>],
    cam: &'a CameraIntrinsics<T>,
}

/// Screen pose plus each mirror as `v = n / d`.
#[derive(Debug, Clone)]
struct JointState<T: Scalar> {
    screen: RigidTransform<T>,
    mirrors: Vec<Vector3<T>>,
}

fn reflect_inverse_distance<T: Scalar>(v: &Vector3<T>, p: &Vector3<T>) -> Vector3<T> {
    p - v * ((v.dot(p) - T::one()) * lit(2.0) / v.norm_squared())
}

impl<T: Scalar> LeastSquaresProblem<T> for JointProblem<'_, T> {
    type State = JointState<T>;

    fn dof(&self) -> usize {
        6 + 3 * self.observations.len()
    }

    fn residuals(&self, s: &JointState<T>) -> Option<DVector<T>> {
        let total: usize = self.object.iter().map(Vec::len).sum();
        let mut r = DVector::zeros(2 * total);
        let mut i = 0;
        for ((obj, obs), v) in self.object.iter().zip(self.observations).zip(&s.mirrors) {
            if !(v.norm_squared() > T::zero()) {
                return None;
            }
            for (x, px) in obj.iter().zip(&obs.pattern_corners_px) {
                let p = reflect_inverse_distance(v, &s.screen.apply(x));
                let proj = self.cam.project(&p).ok()?;
                r[i] = proj.x - px.x;
                r[i + 1] = proj.y - px.y;
                i += 2;
            }
        }
        Some(r)
    }

    fn retract(&self, s: &JointState<T>, d: &DVector<T>) -> JointState<T> {
        let w = Vector3::new(d[0], d[1], d[2]);
        let rotation = Rotation3::new(w).into_inner() * s.screen.rotation;
        let translation = s.screen.translation + Vector3::new(d[3], d[4], d[5]);
        let mirrors = s
            .mirrors
            .iter()
            .enumerate()
            .map(|(k, v)| v + Vector3::new(d[6 + 3 * k], d[7 + 3 * k], d[8 + 3 * k]))
            .collect();
        JointState { screen: RigidTransform { rotation, translation }, mirrors }
    }

    fn diff_step(&self, s: &JointState<T>, k: usize) -> T {
        match k {
            0..=2 => lit(1e-7),
            3..=5 => lit(1e-4),
            _ => s.mirrors[(k - 6) / 3].norm() * lit(1e-6),
        }
    }
}

/// Recovers the fixed screen pose from ≥ 3 mirror observations.
pub fn calibrate_screen_from_mirrors<T: Scalar>(
    observations: &[MirrorObservation<T>],
    cam: &CameraIntrinsics<T>,
    geometry: &ScreenGeometry<T>,
    cfg: &MirrorConfig<T>,
) -> Result<MirrorCalibration<T>, CalibrationError> {
    let k_obs = observations.len();
    if k_obs < 3 {
        return Err(CalibrationError::InsufficientData { required: 3, actual: k_obs });
    }
    geometry.validate()?;
    let virtual_poses = observations
        .iter()
        .map(|o| solve_reflected_pose(o, cam, geometry))
        .collect::<Result<Vec<_>, _>>()?;
    // Q_k = D_k R_s for every observation.
    let q: Vec<Matrix3<T>> = virtual_poses.iter().map(|p| p.rotation * flip_z()).collect();

    // Q_i Q_jᵀ = D_i D_j rotates about n_i × n_j by twice the mirror angle.
    let mut axes = vec![vec![]; k_obs];
    let two: T = lit(2.0);
    for i in 0..k_obs {
        for j in (i + 1)..k_obs {
            let w = q[i] * q[j].transpose();
            let angle = rotation_angle_deg(&w) / two;
            if angle < cfg.min_angle_deg {
                return Err(CalibrationError::MirrorsTooClose {
                    a: i,
                    b: j,
                    angle_deg: angle.to_f64_lossy(),
                    min_deg: cfg.min_angle_deg.to_f64_lossy(),
                });
            }
            let m = w - Matrix3::identity();
            let (axis, _) = null_vector(&[m.row(0).transpose(), m.row(1).transpose(), m.row(2).transpose()]);
            axes[i].push(axis);
            axes[j].push(axis);
        }
    }

    let mut normals = Vec::with_capacity(k_obs);
    for (k, ax) in axes.iter().enumerate() {
        let (mut n, cond) = null_vector(ax);
        if !(cond < cfg.max_condition) {
            return Err(CalibrationError::IllConditioned { what: "mirror normal system", condition: cond.to_f64_lossy() });
        }
        // The virtual pattern lies beyond the mirror as seen from the camera.
        if n.dot(&virtual_poses[k].translation) < T::zero() {
            n = -n;
        }
        normals.push(n);
    }
    let householder = |n: &Vector3<T>| Matrix3::identity() - n * n.transpose() * two;

    let mut sum = Matrix3::zeros();
    for (n, qk) in normals.iter().zip(&q) {
        sum += householder(n) * qk;
    }
    let rotation = nearest_rotation(&sum);

    // D_k t + 2 d_k n_k = t'_k, unknowns [t; d_1..d_K].
    let mut a = DMatrix::zeros(3 * k_obs, 3 + k_obs);
    let mut b = DVector::zeros(3 * k_obs);
    for (k, (n, vp)) in normals.iter().zip(&virtual_poses).enumerate() {
        let dk = householder(n);
        for r in 0..3 {
            for c in 0..3 {
                a[(3 * k + r, c)] = dk[(r, c)];
            }
            a[(3 * k + r, 3 + k)] = two * n[r];
            b[3 * k + r] = vp.translation[r];
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > T::zero() { smax / smin } else { T::max_value().unwrap_or(lit(f64::MAX)) };
    if !(cond < cfg.max_condition) {
        return Err(CalibrationError::IllConditioned { what: "translation system", condition: cond.to_f64_lossy() });
    }
    let sol = svd.solve(&b, T::zero()).map_err(|_| CalibrationError::Refinement("translation solve failed"))?;
    let translation = Vector3::new(sol[0], sol[1], sol[2]);
    let linear_pose = RigidTransform { rotation, translation };

    let mut mirrors0 = Vec::with_capacity(k_obs);
    for (k, n) in normals.iter().enumerate() {
        let d = sol[3 + k];
        if !(d > T::zero()) {
            return Err(CalibrationError::Refinement("mirror plane does not face the camera"));
        }
        mirrors0.push(n / d);
    }

    let object = observations
        .iter()
        .map(|o| o.pattern_geometry.iter().map(|p| geometry.px_to_mm(p)).collect())
        .collect();
    let problem = JointProblem { object, observations, cam };
    let init = JointState { screen: linear_pose, mirrors: mirrors0 };
    let (state, report) =
        lm::minimize(&problem, init, &cfg.lm).ok_or(CalibrationError::Refinement("initial estimate projects behind camera"))?;

    let pose = RigidTransform { rotation: nearest_rotation(&state.screen.rotation), translation: state.screen.translation };
    let screen = ScreenModel::new(pose, *geometry)?;
    let mirrors = state
        .mirrors
        .iter()
        .map(|v| {
            let len = v.norm();
            MirrorPlane { normal: v / len, distance: T::one() / len }
        })
        .collect();
    let n_res: usize = observations.iter().map(|o| o.pattern_corners_px.len()).sum();
    let rms_reprojection_px = (report.final_cost / lit(n_res as f64)).sqrt();
    Ok(MirrorCalibration { screen, mirrors, linear_pose, rms_reprojection_px, report })
}
