//! Perspective-n-point: EPnP initialization and Levenberg–Marquardt refinement.
//!
//! EPnP expresses every object point as a barycentric combination of four
//! control points (centroid plus the principal directions of the point cloud),
//! or three when the object is planar, and recovers the control points in the
//! camera frame from the null space of a linear system. The pose is then
//! obtained by absolute orientation between the object and camera points.

use nalgebra::{DMatrix, DVector, Matrix3, Point2, Rotation3, Vector3};
use thiserror::Error;

use crate::geom::{CameraIntrinsics, GeomError, RigidTransform};
use crate::lm::{self, LeastSquaresProblem, LmConfig, LmReport};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PnpError {
    #[error("need at least {required} correspondences, got {actual}")]
    InsufficientPoints { required: usize, actual: usize },
    #[error("object and image point counts differ ({object} vs {image})")]
    LengthMismatch { object: usize, image: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error("non-finite input")]
    NonFinite,
    #[error("points project behind the camera")]
    BehindCamera,
    #[error(transparent)]
    Geom(#[from] GeomError),
}

/// Singular-value ratio below which the object is treated as planar.
pub const PLANAR_RATIO: f64 = 1e-6;

/// Sum of squared pixel residuals and per-point errors for a pose.
pub fn reprojection_errors<T: Scalar>(
    object: &[Vector3<T>],
    image: &[Point2<T>],
    cam: &CameraIntrinsics<T>,
    pose: &RigidTransform<T>,
) -> Result<Vec<T>, GeomError> {
    object
        .iter()
        .zip(image)
        .map(|(x, u)| Ok((cam.project(&pose.apply(x))? - u).norm()))
        .collect()
}

fn check_inputs<T: Scalar>(object: &[Vector3<T>], image: &[Point2<T>], required: usize) -> Result<(), PnpError> {
    if object.len() != image.len() {
        return Err(PnpError::LengthMismatch { object: object.len(), image: image.len() });
    }
    if object.len() < required {
        return Err(PnpError::InsufficientPoints { required, actual: object.len() });
    }
    let finite = object.iter().all(|p| p.iter().all(|v| v.is_finite()))
        && image.iter().all(|p| p.coords.iter().all(|v| v.is_finite()));
    if !finite {
        return Err(PnpError::NonFinite);
    }
    Ok(())
}

/// Rigid transform `R, t` minimizing Σ‖R·src + t − dst‖².
pub fn absolute_orientation<T: Scalar>(src: &[Vector3<T>], dst: &[Vector3<T>]) -> RigidTransform<T> {
    let n: T = lit(src.len() as f64);
    let cs = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let cd = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (d - cd) * (s - cs).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < T::zero() {
        d[(2, 2)] = -T::one();
    }
    let rotation = u * d * v_t;
    RigidTransform { rotation, translation: cd - rotation * cs }
}

struct ControlFrame<T: Scalar> {
    world: Vec<Vector3<T>>,
    alphas: Vec<Vec<T>>,
}

fn control_frame<T: Scalar>(object: &[Vector3<T>]) -> Result<ControlFrame<T>, PnpError> {
    let n: T = lit(object.len() as f64);
    let c0 = object.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in object {
        let d = p - c0;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let sv: Vec<T> = order.iter().map(|&k| eig.eigenvalues[k].max(T::zero()).sqrt()).collect();
    if !(sv[0] > T::zero()) || sv[1] / sv[0] < lit(PLANAR_RATIO) {
        return Err(PnpError::Degenerate("object points are collinear"));
    }
    let planar = sv[2] / sv[0] < lit(PLANAR_RATIO);
    let dims = if planar { 2 } else { 3 };

    // Axis offsets scaled by the RMS spread along each principal direction.
    let axes: Vec<Vector3<T>> = order[..dims]
        .iter()
        .zip(&sv)
        .map(|(&k, &s)| eig.eigenvectors.column(k).into_owned() * (s / n.sqrt()))
        .collect();
    let mut world = vec![c0];
    world.extend(axes.iter().map(|a| c0 + a));

    let alphas = object
        .iter()
        .map(|p| {
            let d = p - c0;
            let mut a: Vec<T> = std::iter::once(T::zero()).chain(axes.iter().map(|ax| ax.dot(&d) / ax.norm_squared())).collect();
            a[0] = T::one() - a[1..].iter().fold(T::zero(), |s, v| s + *v);
            a
        })
        .collect();
    Ok(ControlFrame { world, alphas })
}

const PAIRS_4: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
const PAIRS_3: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// EPnP pose of `object` (object frame) from pixel observations `image`.
pub fn epnp<T: Scalar>(
    object: &[Vector3<T>],
    image: &[Point2<T>],
    cam: &CameraIntrinsics<T>,
) -> Result<RigidTransform<T>, PnpError> {
    check_inputs(object, image, 4)?;
    let frame = control_frame(object)?;
    let m = frame.world.len();
    let pairs: &[(usize, usize)] = if m == 4 { &PAIRS_4 } else { &PAIRS_3 };

    let mut mat = DMatrix::zeros(2 * object.len(), 3 * m);
    for (i, (alpha, px)) in frame.alphas.iter().zip(image).enumerate() {
        for (j, &a) in alpha.iter().enumerate() {
            mat[(2 * i, 3 * j)] = a * cam.fx;
            mat[(2 * i, 3 * j + 2)] = a * (cam.cx - px.x);
            mat[(2 * i + 1, 3 * j + 1)] = a * cam.fy;
            mat[(2 * i + 1, 3 * j + 2)] = a * (cam.cy - px.y);
        }
    }
    let mtm = mat.transpose() * &mat;
    let eig = mtm.symmetric_eigen();
    let mut idx: Vec<usize> = (0..3 * m).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal));
    let kernel: Vec<Vec<Vector3<T>>> = idx[..3]
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            (0..m).map(|j| Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2])).collect()
        })
        .collect();

    let rho: Vec<T> = pairs.iter().map(|&(a, b)| (frame.world[a] - frame.world[b]).norm_squared()).collect();
    let max_dim = if m == 4 { 3 } else { 2 };

    let mut best: Option<(T, RigidTransform<T>)> = None;
    for dim in 1..=max_dim {
        let Some(betas) = initial_betas(&kernel[..dim], pairs, &rho) else { continue };
        let betas = refine_betas(&kernel[..dim], pairs, &rho, betas);
        let Some(pose) = pose_from_betas(&kernel[..dim], &betas, &frame, object) else { continue };
        let Ok(errs) = reprojection_errors(object, image, cam, &pose) else { continue };
        let cost = errs.iter().fold(T::zero(), |s, e| s + *e * *e);
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, pose));
        }
    }
    best.map(|(_, p)| p).ok_or(PnpError::Degenerate("no EPnP hypothesis in front of the camera"))
}

fn pair_diffs<T: Scalar>(kernel: &[Vec<Vector3<T>>], a: usize, b: usize) -> Vec<Vector3<T>> {
    kernel.iter().map(|v| v[a] - v[b]).collect()
}

/// Linearized distance-constraint solution for the kernel weights.
fn initial_betas<T: Scalar>(kernel: &[Vec<Vector3<T>>], pairs: &[(usize, usize)], rho: &[T]) -> Option<Vec<T>> {
    let dim = kernel.len();
    if dim == 1 {
        let (mut num, mut den) = (T::zero(), T::zero());
        for (&(a, b), &r) in pairs.iter().zip(rho) {
            let dv = (kernel[0][a] - kernel[0][b]).norm();
            num += dv * r.sqrt();
            den += dv * dv;
        }
        return (den > T::zero()).then(|| vec![num / den]);
    }
    // Unknowns: products beta_k * beta_l for k <= l.
    let terms: Vec<(usize, usize)> = (0..dim).flat_map(|k| (k..dim).map(move |l| (k, l))).collect();
    let mut l_mat = DMatrix::zeros(pairs.len(), terms.len());
    for (row, &(a, b)) in pairs.iter().enumerate() {
        let d = pair_diffs(kernel, a, b);
        for (col, &(k, l)) in terms.iter().enumerate() {
            let f: T = if k == l { T::one() } else { lit(2.0) };
            l_mat[(row, col)] = f * d[k].dot(&d[l]);
        }
    }
    let rhs = DVector::from_column_slice(rho);
    let sol = l_mat.svd(true, true).solve(&rhs, lit(1e-12)).ok()?;
    let diag = |k: usize| terms.iter().position(|&t| t == (k, k)).map(|i| sol[i]);
    let b00 = diag(0)?;
    let b0 = b00.abs().sqrt();
    if !(b0 > T::zero()) {
        return None;
    }
    let mut betas = vec![b0];
    for k in 1..dim {
        let cross = terms.iter().position(|&t| t == (0, k)).map(|i| sol[i])?;
        // beta_0 beta_k / beta_0 recovers beta_k with its sign.
        betas.push(cross / b0);
    }
    Some(betas)
}

/// Gauss–Newton on the control-point distance constraints.
fn refine_betas<T: Scalar>(kernel: &[Vec<Vector3<T>>], pairs: &[(usize, usize)], rho: &[T], mut betas: Vec<T>) -> Vec<T> {
    let dim = kernel.len();
    let diffs: Vec<Vec<Vector3<T>>> = pairs.iter().map(|&(a, b)| pair_diffs(kernel, a, b)).collect();
    for _ in 0..10 {
        let mut jac = DMatrix::zeros(pairs.len(), dim);
        let mut res = DVector::zeros(pairs.len());
        for (row, d) in diffs.iter().enumerate() {
            let v = d.iter().zip(&betas).fold(Vector3::zeros(), |s, (dk, bk)| s + dk * *bk);
            res[row] = v.norm_squared() - rho[row];
            for k in 0..dim {
                jac[(row, k)] = lit::<T>(2.0) * v.dot(&d[k]);
            }
        }
        let Ok(step) = jac.clone().svd(true, true).solve(&res, lit(1e-14)) else { break };
        for k in 0..dim {
            betas[k] -= step[k];
        }
        if step.norm() <= T::default_epsilon() * (T::one() + betas[0].abs()) {
            break;
        }
    }
    betas
}

fn pose_from_betas<T: Scalar>(
    kernel: &[Vec<Vector3<T>>],
    betas: &[T],
    frame: &ControlFrame<T>,
    object: &[Vector3<T>],
) -> Option<RigidTransform<T>> {
    let m = frame.world.len();
    let ctrl: Vec<Vector3<T>> = (0..m)
        .map(|j| kernel.iter().zip(betas).fold(Vector3::zeros(), |s, (v, b)| s + v[j] * *b))
        .collect();
    let mut cam_pts: Vec<Vector3<T>> = frame
        .alphas
        .iter()
        .map(|a| a.iter().zip(&ctrl).fold(Vector3::zeros(), |s, (ai, c)| s + c * *ai))
        .collect();
    let mean_z = cam_pts.iter().fold(T::zero(), |s, p| s + p.z);
    if mean_z < T::zero() {
        cam_pts.iter_mut().for_each(|p| *p = -*p);
    }
    let pose = absolute_orientation(object, &cam_pts);
    pose.rotation.iter().all(|v| v.is_finite()).then_some(pose)
}

/// Reprojection least squares over SE(3), rotation updated on the left by exp(ω).
pub struct PnpProblem<'a, T: Scalar> {
    pub object: &'a [Vector3<T>],
    pub image: &'a [Point2<T>],
    pub cam: &'a CameraIntrinsics<T>,
}

impl<T: Scalar> LeastSquaresProblem<T> for PnpProblem<'_, T> {
    type State = RigidTransform<T>;

    fn dof(&self) -> usize {
        6
    }

    fn residuals(&self, pose: &RigidTransform<T>) -> Option<DVector<T>> {
        let mut r = DVector::zeros(2 * self.object.len());
        for (i, (x, u)) in self.object.iter().zip(self.image).enumerate() {
            let p = self.cam.project(&pose.apply(x)).ok()?;
            r[2 * i] = p.x - u.x;
            r[2 * i + 1] = p.y - u.y;
        }
        Some(r)
    }

    fn retract(&self, pose: &RigidTransform<T>, d: &DVector<T>) -> RigidTransform<T> {
        let rot = Rotation3::new(Vector3::new(d[0], d[1], d[2])).into_inner();
        RigidTransform { rotation: rot * pose.rotation, translation: pose.translation + Vector3::new(d[3], d[4], d[5]) }
    }

    fn jacobian(&self, pose: &RigidTransform<T>) -> Option<DMatrix<T>> {
        let mut jac = DMatrix::zeros(2 * self.object.len(), 6);
        for (i, x) in self.object.iter().enumerate() {
            let rx = pose.rotation * x;
            let p = rx + pose.translation;
            if !(p.z > T::zero()) {
                return None;
            }
            let iz = T::one() / p.z;
            let du = Vector3::new(self.cam.fx * iz, T::zero(), -self.cam.fx * p.x * iz * iz);
            let dv = Vector3::new(T::zero(), self.cam.fy * iz, -self.cam.fy * p.y * iz * iz);
            // d(exp(ω) R x)/dω at ω = 0 is -[R x]×, so grad·(ω × Rx) = ω·(Rx × grad).
            let du_rot = rx.cross(&du);
            let dv_rot = rx.cross(&dv);
            for k in 0..3 {
                jac[(2 * i, k)] = du_rot[k];
                jac[(2 * i + 1, k)] = dv_rot[k];
                jac[(2 * i, 3 + k)] = du[k];
                jac[(2 * i + 1, 3 + k)] = dv[k];
            }
        }
        Some(jac)
    }
}

/// LM refinement of an initial pose; the result never has a larger squared residual.
pub fn refine_pose<T: Scalar>(
    object: &[Vector3<T>],
    image: &[Point2<T>],
    cam: &CameraIntrinsics<T>,
    init: &RigidTransform<T>,
    cfg: &LmConfig<T>,
) -> Result<(RigidTransform<T>, LmReport<T>), PnpError> {
    check_inputs(object, image, 3)?;
    let problem = PnpProblem { object, image, cam };
    let (pose, report) = lm::minimize(&problem, *init, cfg).ok_or(PnpError::BehindCamera)?;
    // Re-orthonormalize to remove drift accumulated by repeated left updates.
    let pose = RigidTransform { rotation: crate::geom::nearest_rotation(&pose.rotation), ..pose };
    let cost = |p: &RigidTransform<T>| {
        reprojection_errors(object, image, cam, p).ok().map(|e| e.iter().fold(T::zero(), |s, x| s + *x * *x))
    };
    // The projection can cost a few ulps; never hand back something worse than the start.
    match (cost(&pose), cost(init)) {
        (Some(after), Some(before)) if after > before => Ok((*init, LmReport { final_cost: report.initial_cost, ..report })),
        _ => Ok((pose, report)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cam() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(1400.0, 1400.0, 960.0, 540.0, 1920, 1080).unwrap()
    }

    fn project_all(obj: &[Vector3<f64>], pose: &RigidTransform<f64>) -> Vec<Point2<f64>> {
        obj.iter().map(|x| cam().project(&pose.apply(x)).unwrap()).collect()
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, planar: bool) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                let z = if planar { 0.0 } else { rng.random_range(-40.0..40.0) };
                Vector3::new(rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0), z)
            })
            .collect()
    }

    #[test]
    fn epnp_exact_on_noiseless_general_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let obj = random_cloud(&mut rng, 8, false);
            let truth = RigidTransform::from_scaled_axis(
                Vector3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)),
                Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(400.0..900.0)),
            );
            let img = project_all(&obj, &truth);
            let est = epnp(&obj, &img, &cam()).unwrap();
            assert!(est.rotation_error_deg(&truth) < 1e-6, "{}", est.rotation_error_deg(&truth));
            assert!(est.translation_error(&truth) < 1e-5);
        }
    }

    #[test]
    fn epnp_planar_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let obj = random_cloud(&mut rng, 9, true);
            let truth = RigidTransform::from_scaled_axis(
                Vector3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-1.0..1.0)),
                Vector3::new(0.0, 0.0, rng.random_range(500.0..1000.0)),
            );
            let img = project_all(&obj, &truth);
            let est = epnp(&obj, &img, &cam()).unwrap();
            assert!(est.rotation_error_deg(&truth) < 1e-5);
            let (refined, _) = refine_pose(&obj, &img, &cam(), &est, &LmConfig::default()).unwrap();
            assert!(refined.translation_error(&truth) < 1e-6);
        }
    }

    #[test]
    fn rejects_collinear_and_short_inputs() {
        let line: Vec<Vector3<f64>> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let img = vec![Point2::new(0.0, 0.0); 5];
        assert!(matches!(epnp(&line, &img, &cam()), Err(PnpError::Degenerate(_))));
        assert!(matches!(epnp(&line[..3], &img[..3], &cam()), Err(PnpError::InsufficientPoints { .. })));
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let obj = random_cloud(&mut rng, 6, false);
        let img = vec![Point2::new(900.0, 500.0); 6];
        let c = cam();
        let problem = PnpProblem { object: &obj, image: &img, cam: &c };
        let pose = RigidTransform::from_scaled_axis(Vector3::new(0.1, 0.2, -0.1), Vector3::new(10.0, -5.0, 600.0));
        let analytic = problem.jacobian(&pose).unwrap();
        // Default trait method: central differences through the retraction.
        struct Numeric<'a>(PnpProblem<'a, f64>);
        impl LeastSquaresProblem<f64> for Numeric<'_> {
            type State = RigidTransform<f64>;
            fn dof(&self) -> usize {
                6
            }
            fn residuals(&self, s: &Self::State) -> Option<DVector<f64>> {
                self.0.residuals(s)
            }
            fn retract(&self, s: &Self::State, d: &DVector<f64>) -> Self::State {
                self.0.retract(s, d)
            }
        }
        let numeric = Numeric(problem).jacobian(&pose).unwrap();
        assert!((analytic - numeric).abs().max() < 1e-4);
    }
}
