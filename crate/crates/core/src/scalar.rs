//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All solvers are written against [`Real`], which is implemented for `f32`
//! and `f64`. Complex quantities are `Complex<T>` for the same `T`.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the solvers.
pub trait Real:
    RealField + FromPrimitive + ToPrimitive + Copy + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in target scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// Smallest relative tolerance that is meaningful for this precision.
    fn tolerance_floor() -> Self {
        Self::default_epsilon() * Self::lit(64.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Lifts a real value into the complex plane.
pub(crate) fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Clamps a configured tolerance to what the scalar precision can resolve.
pub(crate) fn tol<T: Real>(x: f64) -> T {
    let t = T::lit(x);
    if t < T::tolerance_floor() {
        T::tolerance_floor()
    } else {
        t
    }
}

/// Modulus of a complex number.
pub(crate) fn cabs<T: Real>(z: Complex<T>) -> T {
    nalgebra::ComplexField::modulus(z)
}

pub(crate) fn cexp<T: Real>(z: Complex<T>) -> Complex<T> {
    nalgebra::ComplexField::exp(z)
}

/// Largest entry modulus of a complex matrix.
pub(crate) fn camax<T: Real>(m: &nalgebra::DMatrix<Complex<T>>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}
