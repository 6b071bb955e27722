//! Scalar abstraction shared by every numerical module.
//!
//! All physics is written against [`Real`], implemented for `f32` and `f64`.
//! The acceptance tolerances (1e-8 .. 1e-10) are only reachable in `f64`;
//! `f32` instantiations are useful for quick scans.

use std::fmt::{Debug, Display, LowerExp};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    faer::traits::RealField
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Machine epsilon, re-exported to avoid the `Float`/`RealField` name clash.
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in T")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in T")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn cre<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// `ln(1 + e^{-x})` for real `x`, without overflow for either sign.
#[inline]
pub fn softplus_neg<T: Real>(x: T) -> T {
    if x > T::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Fermi factor `1 / (1 + e^{z})` for complex `z`, branch-stable.
#[inline]
pub fn fermi<T: Real>(z: Complex<T>) -> Complex<T> {
    let one = cre(T::one());
    if z.re > T::zero() {
        let w = (-z).exp();
        w / (one + w)
    } else {
        one / (one + z.exp())
    }
}

/// `ln |1 + e^{-z}|^2` for complex `z`: the log of a conjugate pair of
/// single-particle trace factors, which is real by construction.
#[inline]
pub fn pair_softplus<T: Real>(z: Complex<T>) -> T {
    let two = cst::<T>(2.0);
    if z.re >= T::zero() {
        // |1 + w|^2 = 1 + 2 Re w + |w|^2 with |w| <= 1.
        let w = (-z).exp();
        (two * w.re + w.norm_sqr()).ln_1p()
    } else {
        // ln|1 + e^{-z}|^2 = -2 Re z + ln|1 + e^{z}|^2.
        let w = z.exp();
        -two * z.re + (two * w.re + w.norm_sqr()).ln_1p()
    }
}

/// Complex `ln(1 + e^{-z})` with the large-`|Re z|` branches handled.
#[inline]
pub fn complex_softplus<T: Real>(z: Complex<T>) -> Complex<T> {
    let one = cre(T::one());
    if z.re >= T::zero() {
        (one + (-z).exp()).ln()
    } else {
        -z + (one + z.exp()).ln()
    }
}

/// Numerically stable `ln(Σ e^{x_i})`; returns `-inf` for an empty input.
pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let s = xs.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    max + s.ln()
}
