//! Scalar abstraction shared by the geometry and the estimator.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating point type the crate is generic over (`f32` or `f64`).
///
/// Geometry defaults to `f64`; the estimator trains in `f32` and is
/// gradient-checked in `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for finite inputs.
    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn to_f32_lossy(self) -> f32;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn to_f32_lossy(self) -> f32 {
                self as f32
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);
