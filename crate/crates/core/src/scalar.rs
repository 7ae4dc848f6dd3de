//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Random draws are always made in `f64` and narrowed with [`Real::from_f64_lossy`],
/// so an `f32` and an `f64` model built from the same seed see the same stream.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + 'static
{
    /// Tag written into model headers.
    const NAME: &'static str;

    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_exact(self) -> f64;

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_f64_lossy(v as f64)
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_exact(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_exact(self) -> f64 {
        self
    }
}
