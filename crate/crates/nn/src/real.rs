use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point element type of a tensor.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Checkpoints always store 32-bit values.
    fn to_f32_storage(self) -> f32;

    fn from_f32_storage(v: f32) -> Self;
}

impl Real for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    #[inline]
    fn to_f32_storage(self) -> f32 {
        self as f32
    }

    #[inline]
    fn from_f32_storage(v: f32) -> Self {
        v as f64
    }
}

impl Real for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    #[inline]
    fn to_f32_storage(self) -> f32 {
        self
    }

    #[inline]
    fn from_f32_storage(v: f32) -> Self {
        v
    }
}
