//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar the simulator is generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Out-of-range values saturate to infinity.
    fn lit(x: f64) -> Self;

    /// A tolerance that is `nominal` for `f64` but never tighter than a few
    /// hundred ulps of the working precision.
    fn tol(nominal: f64) -> Self {
        Self::lit(nominal).max(Self::epsilon() * Self::lit(256.0))
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
}

/// Complex number over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Cplx<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub(crate) fn i_unit<T: Real>() -> Cplx<T> {
    Complex::new(T::zero(), T::one())
}

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Converts a frequency quoted as `value/2π` in MHz to angular rad/s.
pub fn mhz_to_angular<T: Real>(mhz: T) -> T {
    mhz * T::lit(1.0e6) * T::TAU()
}

/// Converts an angular frequency in rad/s to `value/2π` in Hz.
pub fn angular_to_hz<T: Real>(omega: T) -> T {
    omega / T::TAU()
}
