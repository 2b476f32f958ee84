//! Third-order polynomial mapping from estimated to true on-screen gaze points.
//!
//! Inputs are scaled to [-1, 1]² by the screen resolution before the monomial
//! basis `[1, u, v, u², uv, v², u³, u²v, uv², v³]` is built. Fits always go
//! through the truncated SVD pseudoinverse, so fewer than ten samples yield the
//! minimum-norm coefficient vector.

use nalgebra::{DMatrix, DVector, Point2};

use super::CalibrationError;
use crate::geom::ScreenGeometry;
use crate::scalar::{lit, Scalar};

pub const NUM_TERMS: usize = 10;

/// Relative singular-value cutoff of the pseudoinverse.
const SV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile<T: Scalar> {
    /// Row 0 maps to x, row 1 to y (pixels).
    pub coeffs: [[T; NUM_TERMS]; 2],
    /// Pixel extent used to scale inputs to [-1, 1].
    pub width_px: T,
    pub height_px: T,
    /// Bounding box of the estimated points the profile was fitted on.
    pub region_min: Point2<T>,
    pub region_max: Point2<T>,
    pub n_samples: usize,
    /// In-sample RMS of the corrected-vs-true distance (pixels).
    pub rms_residual: T,
    pub created_at_us: i64,
}

/// Result of applying a profile, flagged when outside the fitted region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrected<T: Scalar> {
    pub point: Point2<T>,
    pub extrapolated: bool,
}

pub fn monomials<T: Scalar>(u: T, v: T) -> [T; NUM_TERMS] {
    [T::one(), u, v, u * u, u * v, v * v, u * u * u, u * u * v, u * v * v, v * v * v]
}

impl<T: Scalar> CalibrationProfile<T> {
    /// Profile that leaves every point unchanged.
    pub fn identity(screen: &ScreenGeometry<T>) -> Self {
        let w: T = lit(screen.width_px as f64);
        let h: T = lit(screen.height_px as f64);
        let half: T = lit(0.5);
        let mut coeffs = [[T::zero(); NUM_TERMS]; 2];
        coeffs[0][0] = w * half;
        coeffs[0][1] = w * half;
        coeffs[1][0] = h * half;
        coeffs[1][2] = h * half;
        Self {
            coeffs,
            width_px: w,
            height_px: h,
            region_min: Point2::origin(),
            region_max: Point2::new(w, h),
            n_samples: 0,
            rms_residual: T::zero(),
            created_at_us: 0,
        }
    }

    fn scaled(&self, p: &Point2<T>) -> (T, T) {
        let two: T = lit(2.0);
        (two * p.x / self.width_px - T::one(), two * p.y / self.height_px - T::one())
    }
}

pub fn apply_calibration<T: Scalar>(profile: &CalibrationProfile<T>, p: &Point2<T>) -> Corrected<T> {
    let (u, v) = profile.scaled(p);
    let basis = monomials(u, v);
    let eval = |row: &[T; NUM_TERMS]| row.iter().zip(&basis).fold(T::zero(), |s, (c, b)| s + *c * *b);
    let extrapolated =
        p.x < profile.region_min.x || p.y < profile.region_min.y || p.x > profile.region_max.x || p.y > profile.region_max.y;
    Corrected { point: Point2::new(eval(&profile.coeffs[0]), eval(&profile.coeffs[1])), extrapolated }
}

/// Least-squares fit over `(estimated, true)` pixel pairs.
pub fn fit_personal_calibration<T: Scalar>(
    pairs: &[(Point2<T>, Point2<T>)],
    screen: &ScreenGeometry<T>,
    created_at_us: i64,
) -> Result<CalibrationProfile<T>, CalibrationError> {
    if pairs.is_empty() {
        return Err(CalibrationError::InsufficientData { required: 1, actual: 0 });
    }
    let finite = |p: &Point2<T>| p.x.is_finite() && p.y.is_finite();
    if !pairs.iter().all(|(a, b)| finite(a) && finite(b)) {
        return Err(CalibrationError::NonFinite);
    }
    let mut profile = CalibrationProfile::identity(screen);
    let n = pairs.len();
    let mut design = DMatrix::zeros(n, NUM_TERMS);
    for (i, (est, _)) in pairs.iter().enumerate() {
        let (u, v) = profile.scaled(est);
        for (k, m) in monomials(u, v).into_iter().enumerate() {
            design[(i, k)] = m;
        }
    }
    let svd = design.svd(true, true);
    let cutoff = svd.singular_values.max() * lit(SV_CUTOFF);
    for axis in 0..2 {
        let rhs = DVector::from_iterator(n, pairs.iter().map(|(_, t)| if axis == 0 { t.x } else { t.y }));
        let sol = svd.solve(&rhs, cutoff).map_err(|_| CalibrationError::NonFinite)?;
        for k in 0..NUM_TERMS {
            profile.coeffs[axis][k] = sol[k];
        }
    }

    let (mut lo, mut hi) = (pairs[0].0, pairs[0].0);
    for (est, _) in pairs {
        lo = Point2::new(lo.x.min(est.x), lo.y.min(est.y));
        hi = Point2::new(hi.x.max(est.x), hi.y.max(est.y));
    }
    profile.region_min = lo;
    profile.region_max = hi;
    profile.n_samples = n;
    profile.created_at_us = created_at_us;

    // Residual through the same evaluation path as apply_calibration.
    let sq = pairs
        .iter()
        .fold(T::zero(), |s, (est, truth)| s + (apply_calibration(&profile, est).point - truth).norm_squared());
    profile.rms_residual = (sq / lit(n as f64)).sqrt();
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn screen() -> ScreenGeometry<f64> {
        ScreenGeometry::new(1218.0, 685.0, 1920, 1080).unwrap()
    }

    fn random_points(n: usize, seed: u64) -> Vec<Point2<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point2::new(rng.random_range(200.0..1700.0), rng.random_range(100.0..1000.0))).collect()
    }

    /// Known cubic map expressed directly in normalized coordinates.
    fn distortion() -> [[f64; NUM_TERMS]; 2] {
        [
            [985.0, 930.0, 12.0, -8.0, 15.0, 4.0, 6.0, -3.0, 2.5, -1.5],
            [530.0, -9.0, 548.0, 3.0, -6.0, 10.0, -2.0, 4.0, -3.5, 5.0],
        ]
    }

    fn distort(p: &Point2<f64>) -> Point2<f64> {
        let (u, v) = (2.0 * p.x / 1920.0 - 1.0, 2.0 * p.y / 1080.0 - 1.0);
        let b = monomials(u, v);
        let c = distortion();
        Point2::new(c[0].iter().zip(&b).map(|(a, b)| a * b).sum(), c[1].iter().zip(&b).map(|(a, b)| a * b).sum())
    }

    #[test]
    fn identity_pairs_fit_identity() {
        let pairs: Vec<_> = random_points(20, 1).into_iter().map(|p| (p, p)).collect();
        let prof = fit_personal_calibration(&pairs, &screen(), 0).unwrap();
        for p in random_points(50, 2) {
            assert!((apply_calibration(&prof, &p).point - p).norm() < 1e-9);
        }
    }

    #[test]
    fn recovers_known_cubic_from_fifteen_pairs() {
        let pairs: Vec<_> = random_points(15, 3).into_iter().map(|p| (p, distort(&p))).collect();
        let prof = fit_personal_calibration(&pairs, &screen(), 0).unwrap();
        for axis in 0..2 {
            for k in 0..NUM_TERMS {
                assert!((prof.coeffs[axis][k] - distortion()[axis][k]).abs() < 1e-6, "axis {axis} term {k}");
            }
        }
        for p in random_points(30, 4) {
            assert!((apply_calibration(&prof, &p).point - distort(&p)).norm() < 1e-5);
        }
    }

    #[test]
    fn zero_pairs_is_insufficient() {
        assert_eq!(
            fit_personal_calibration::<f64>(&[], &screen(), 0),
            Err(CalibrationError::InsufficientData { required: 1, actual: 0 })
        );
    }

    #[test]
    fn identity_profile_is_identity() {
        let prof = CalibrationProfile::identity(&screen());
        let p = Point2::new(123.25, 987.5);
        assert!((apply_calibration(&prof, &p).point - p).norm() < 1e-12);
    }

    #[test]
    fn single_sample_is_minimum_norm() {
        let est = Point2::new(960.0, 540.0);
        let truth = Point2::new(1000.0, 500.0);
        let prof = fit_personal_calibration(&[(est, truth)], &screen(), 0).unwrap();
        // At the screen centre the basis is e0, so the min-norm fit is constant.
        assert!((prof.coeffs[0][0] - 1000.0).abs() < 1e-9);
        assert!(prof.coeffs[0][1..].iter().all(|c| c.abs() < 1e-9));
        let far = apply_calibration(&prof, &Point2::new(100.0, 100.0)).point;
        assert!((far - truth).norm() < 1e-9);
        assert!(prof.rms_residual < 1e-9);
    }

    #[test]
    fn extrapolation_is_flagged() {
        let pts = random_points(20, 5);
        let pairs: Vec<_> = pts.iter().map(|p| (*p, *p)).collect();
        let prof = fit_personal_calibration(&pairs, &screen(), 0).unwrap();
        let centre = Point2::new(
            (prof.region_min.x + prof.region_max.x) / 2.0,
            (prof.region_min.y + prof.region_max.y) / 2.0,
        );
        assert!(!apply_calibration(&prof, &centre).extrapolated);
        let outside = Point2::new(2.0 * prof.region_max.x, 2.0 * prof.region_max.y);
        assert!(apply_calibration(&prof, &outside).extrapolated);
    }

    #[test]
    fn rms_matches_reapplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pairs: Vec<_> = random_points(40, 6)
            .into_iter()
            .map(|p| (p, distort(&p) + nalgebra::Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0))))
            .collect();
        let prof = fit_personal_calibration(&pairs, &screen(), 0).unwrap();
        let sq: f64 = pairs.iter().map(|(e, t)| (apply_calibration(&prof, e).point - t).norm_squared()).sum();
        assert_eq!((sq / pairs.len() as f64).sqrt(), prof.rms_residual);
    }
}
