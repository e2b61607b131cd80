//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Real floating-point scalar: `f32` or `f64`.
///
/// Combines the `num-traits` float interface used by the signal-processing
/// code with the `nalgebra` field interface used by the dense solvers. Both
/// traits define methods such as `sqrt`, so generic code calls them through
/// `Float::` to stay unambiguous.
pub trait Real:
    Float + FloatConst + FromPrimitive + RealField + FftNum + Default + Debug + Display
{
    /// Machine epsilon as an `f64`, for tolerance arithmetic.
    fn eps_f64() -> f64 {
        num_traits::ToPrimitive::to_f64(&<Self as Float>::epsilon()).unwrap_or(f64::EPSILON)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex sample type over a [`Real`] scalar.
pub type Cx<T> = Complex<T>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    <T as FromPrimitive>::from_f64(x).expect("f64 literal representable in T")
}

/// Converts `T` back to `f64`.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    num_traits::ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

#[inline]
pub fn cx<T: Real>(re: f64, im: f64) -> Cx<T> {
    Complex::new(lit(re), lit(im))
}

/// `|z|^2` without the square root.
#[inline]
pub fn norm_sqr<T: Real>(z: Cx<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// Euclidean norm of a complex vector, accumulated in `f64`.
pub fn vec_norm<T: Real>(v: &[Cx<T>]) -> f64 {
    v.iter()
        .map(|z| {
            let (re, im) = (to_f64(z.re), to_f64(z.im));
            re * re + im * im
        })
        .sum::<f64>()
        .sqrt()
}
