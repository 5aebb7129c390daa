//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra as na;

/// Real floating-point scalar usable throughout the toolkit (`f32` or `f64`).
pub trait Real: na::RealField + Copy + num_traits::ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    na::convert(x)
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    na::convert(n as f64)
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
