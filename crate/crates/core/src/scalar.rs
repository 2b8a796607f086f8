//! Scalar abstraction for the analytic layer.
//!
//! All closed-form math (overlaps, density matrices, leakage curves) is
//! generic over [`Real`] so it runs identically on `f32` and `f64`. The
//! Monte Carlo engine and the time-tag pipeline are `f64`-only; see the
//! crate-root aliases for the concrete types.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar usable by the analytic layer: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + std::fmt::Debug + std::fmt::Display + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar type.
#[inline]
pub fn real<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("f64 literal representable in scalar type")
}
