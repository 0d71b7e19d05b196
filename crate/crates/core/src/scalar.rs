//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;

/// Floating-point scalar usable by the solvers: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + FftNum + Default + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    /// Widens to `f64` for reporting and I/O.
    #[inline]
    fn f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Vec3<T> = [T; 3];

#[inline]
pub fn cross<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn dot<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm<T: Real>(a: Vec3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn normalize<T: Real>(a: Vec3<T>) -> Vec3<T> {
    let n = norm(a);
    if n > T::zero() {
        [a[0] / n, a[1] / n, a[2] / n]
    } else {
        a
    }
}
