//! Scalar abstraction shared by the geometry, pose and calibration code.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point type the geometry core can be instantiated with: `f32` or `f64`.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + fmt::Display + fmt::LowerExp + Send + Sync + 'static
{
    /// Tolerance used when validating invariants such as rotation orthonormality
    /// or unit-norm directions.
    fn invariant_tol() -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn invariant_tol() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    fn invariant_tol() -> Self {
        1e-9
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    nalgebra::convert(v)
}

#[inline]
pub fn deg_to_rad<T: Scalar>(deg: T) -> T {
    deg * T::pi() / lit(180.0)
}

#[inline]
pub fn rad_to_deg<T: Scalar>(rad: T) -> T {
    rad * lit(180.0) / T::pi()
}
