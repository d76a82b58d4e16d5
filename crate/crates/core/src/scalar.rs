//! Scalar abstraction shared by every problem and solver.

use std::fmt::{Debug, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type the solvers are generic over.
///
/// Implemented for `f32` and `f64`. All linear algebra (SVD, Cholesky) is
/// delegated to nalgebra, so anything satisfying `RealField` works.
pub trait Scalar:
    RealField + Copy + Debug + LowerExp + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: RealField + Copy + Debug + LowerExp + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    nalgebra::convert(v)
}

/// Lossy conversion to `f64` for reporting.
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
