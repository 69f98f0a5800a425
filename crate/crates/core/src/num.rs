//! Scalar and sample abstractions shared by every numeric routine.
//!
//! All kernels are generic over [`Real`] so the same code runs in `f64` for
//! metrology-grade verification and in `f32` where throughput matters more
//! than the last few digits. Trace containers are additionally generic over
//! [`Sample`] so the Hadamard combine/decode path treats raw RF (real) and
//! demodulated baseband (complex) identically.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, Zero};

/// Floating-point scalar used throughout the crate (`f32` or `f64`).
///
/// Every `Real` is also a [`Sample`] of itself, and `Complex<S>` is a
/// `Sample` for any `S: Real`, so generic code can store either raw RF or
/// demodulated IQ traces without extra bounds.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Default
    + Send
    + Sync
    + Sample<Scalar = Self>
    + std::fmt::Display
    + std::fmt::LowerExp
{
    /// Shorthand for converting constants; panics only for non-finite input,
    /// which never occurs for the literals this is used with.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant converts to scalar type")
    }
}

impl Real for f32 {}

impl Real for f64 {}

/// One stored trace element: a real scalar or a complex IQ pair.
///
/// The operations are exactly what linear encode/decode needs: addition,
/// subtraction and scaling by a real factor. Anything nonlinear (envelope,
/// phase rotation) is done at concrete types.
pub trait Sample:
    Copy
    + Send
    + Sync
    + Zero
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::fmt::Debug
    + PartialEq
    + 'static
{
    type Scalar: Real;

    /// Multiply by a real factor.
    fn scale(self, k: Self::Scalar) -> Self;

    /// Magnitude of the sample (absolute value or complex modulus).
    fn magnitude(self) -> Self::Scalar;
}

macro_rules! impl_sample {
    ($t:ty) => {
        impl Sample for $t {
            type Scalar = $t;

            #[inline]
            fn scale(self, k: $t) -> $t {
                self * k
            }

            #[inline]
            fn magnitude(self) -> $t {
                self.abs()
            }
        }
    };
}

impl_sample!(f32);
impl_sample!(f64);

impl<S: Real> Sample for Complex<S> {
    type Scalar = S;

    #[inline]
    fn scale(self, k: S) -> Complex<S> {
        Complex::new(self.re * k, self.im * k)
    }

    #[inline]
    fn magnitude(self) -> S {
        self.norm()
    }
}

/// Euclidean distance between two points.
#[inline]
pub fn distance<S: Real>(a: [S; 3], b: [S; 3]) -> S {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_and_magnitude_match_primitive_behaviour() {
        assert_eq!(2.0f64.scale(3.0), 6.0);
        assert_eq!((-2.0f64).magnitude(), 2.0);
        let z = Complex::new(3.0f64, 4.0).scale(2.0);
        assert_eq!(z, Complex::new(6.0, 8.0));
        assert_eq!(z.magnitude(), 10.0);
    }

    #[test]
    fn distance_is_symmetric_and_exact_on_axis() {
        let a = [0.0f64, 0.0, 0.0];
        let b = [0.0, 0.0, 8.0e-3];
        assert_eq!(distance(a, b), 8.0e-3);
        assert_eq!(distance(a, b), distance(b, a));
    }
}
