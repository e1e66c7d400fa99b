//! Scalar abstraction for the numeric core.
//!
//! All tensor, model, loss and optimizer math is generic over [`Scalar`] so the
//! same kernels run at `f32` or `f64`. The crate root exports `f64` aliases,
//! which is what the pipeline and all verification tolerances assume.

use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point scalar usable by the numeric core.
pub trait Scalar:
    Float + num_traits::NumAssignOps + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used to inject constants and RNG draws.
    fn from_f64(x: f64) -> Self;

    /// Widening conversion to `f64`, used for reporting and serialization.
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}
