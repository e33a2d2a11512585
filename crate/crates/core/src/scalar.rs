//! Floating-point scalar abstraction shared by every numerical module.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};

/// A real floating-point type usable as the component of complex points.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant (tolerances, sample parameters).
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|z|^2`
#[inline]
pub fn abs2<T: Scalar>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

/// `|z|^e` for a real exponent, with `0^e = 0` for `e > 0`.
#[inline]
pub fn abs_pow<T: Scalar>(z: Complex<T>, e: T) -> T {
    let r = z.norm();
    if r == T::zero() {
        if e > T::zero() {
            T::zero()
        } else if e == T::zero() {
            T::one()
        } else {
            T::infinity()
        }
    } else {
        r.powf(e)
    }
}

/// Principal branch `z^e` for a real exponent.
#[inline]
pub fn principal_pow<T: Scalar>(z: Complex<T>, e: T) -> Complex<T> {
    if z.re == T::zero() && z.im == T::zero() {
        return if e == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::new(T::zero(), T::zero())
        };
    }
    let (r, theta) = z.to_polar();
    Complex::from_polar(r.powf(e), theta * e)
}

/// Unimodular `exp(i theta)`.
#[inline]
pub fn cis<T: Scalar>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Integer power; negative exponents divide.
#[inline]
pub fn int_pow<T: Scalar>(z: Complex<T>, e: i64) -> Complex<T> {
    let mut base = if e < 0 { z.inv() } else { z };
    let mut n = e.unsigned_abs();
    let mut acc = Complex::new(T::one(), T::zero());
    while n > 0 {
        if n & 1 == 1 {
            acc = acc * base;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}
