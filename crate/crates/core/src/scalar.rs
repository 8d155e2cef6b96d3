//! Scalar abstraction. Everything numeric in the crate is generic over [`Real`],
//! which is implemented for `f32` and `f64`.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Real floating point scalar usable as the base field of [`crate::ComplexMatrix`].
///
/// The tolerance hooks give precision-appropriate defaults; the `f64` values are
/// the ones the numerical contracts are stated in.
pub trait Real:
    RealField
    + Copy
    + Default
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Absolute eigenvalue threshold below which an eigenvalue counts as zero.
    fn zero_tol() -> Self;
    /// Tolerance for projector validity (`‖Π²−Π‖₁`, `‖Π−Π†‖₁`).
    fn projector_tol() -> Self;
    /// Tolerance for Hermiticity checks on inputs of semidefinite comparisons.
    fn hermitian_tol() -> Self;
    /// Relative threshold separating zero from nonzero singular values.
    fn sign_tol() -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("representable integer")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    fn zero_tol() -> Self {
        1e-8
    }
    fn projector_tol() -> Self {
        1e-9
    }
    fn hermitian_tol() -> Self {
        1e-10
    }
    fn sign_tol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    fn zero_tol() -> Self {
        1e-4
    }
    fn projector_tol() -> Self {
        1e-4
    }
    fn hermitian_tol() -> Self {
        1e-5
    }
    fn sign_tol() -> Self {
        1e-4
    }
}

/// Complex scalar over `R`.
pub type C<R> = Complex<R>;

#[inline]
pub(crate) fn c<R: Real>(re: R) -> C<R> {
    Complex::new(re, R::zero())
}

/// Modulus `|z|`.
#[inline]
pub fn cabs<R: Real>(z: C<R>) -> R {
    z.re.hypot(z.im)
}
