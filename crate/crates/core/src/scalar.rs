//! Scalar abstraction shared by every numerical routine in the crate.

use nalgebra as na;
use num_complex::Complex;
use num_traits as nt;

/// Floating point type the simulator can be instantiated with (`f32` or `f64`).
pub trait Real:
    na::RealField + Copy + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + Send + Sync
{
    /// Largest tolerated entry of `|M - M^†|` for a matrix flagged Hermitian.
    fn hermitian_tolerance() -> Self;

    /// Converts an `f64` literal. Never fails for finite input.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_index(n: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(n).expect("representable index")
    }
}

impl Real for f32 {
    fn hermitian_tolerance() -> Self {
        1e-4
    }
}

impl Real for f64 {
    fn hermitian_tolerance() -> Self {
        1e-12
    }
}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub(crate) fn im<T: Real>(x: T) -> C<T> {
    Complex::new(T::zero(), x)
}

/// `exp(i θ)`
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> C<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `|z|`
#[inline]
pub(crate) fn modulus<T: Real>(z: C<T>) -> T {
    z.norm_sqr().sqrt()
}
