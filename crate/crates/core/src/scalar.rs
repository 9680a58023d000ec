//! Scalar abstraction shared by the linear-algebra and transform layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance used when checking symmetry of nominally symmetric matrices.
    fn symmetry_tol() -> Self;
}

impl Real for f32 {
    fn symmetry_tol() -> Self {
        // 1e-12 is below f32 resolution
        16.0 * f32::EPSILON
    }
}

impl Real for f64 {
    fn symmetry_tol() -> Self {
        1e-12
    }
}
