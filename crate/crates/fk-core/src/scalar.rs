//! Floating-point scalar abstraction for the numerical kernels.
//!
//! Everything downstream (charts, operators, solvers) is generic over
//! [`Scalar`] so the same code runs in f32 and f64. The tight default
//! tolerances only make sense in f64; callers picking f32 must loosen them.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type the solver stack is generic over.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an f64 literal. Panics only for exotic types
    /// that cannot represent ordinary constants, which the float impls can.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Value as f64 for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total-order comparison for finite values. Fields handled by this crate
/// carry a finiteness invariant, so NaN is a programming error here.
#[inline]
pub fn cmp_finite<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.partial_cmp(&b).expect("non-finite value in comparison")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn of_round_trips_constants() {
        assert_eq!(f64::of(1.5), 1.5);
        assert_eq!(f32::of(2.0), 2.0f32);
    }

    #[test]
    fn cmp_finite_orders() {
        assert_eq!(cmp_finite(1.0, 2.0), std::cmp::Ordering::Less);
    }
}
