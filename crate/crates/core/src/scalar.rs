//! Numeric bounds shared by the crate.
//!
//! Two tiers are used:
//!
//! - [`Scalar`] covers everything that only needs field arithmetic and ordering: the
//!   maximum-probability score, ensemble means and the rejection-curve metrics. Exact types such
//!   as `num_rational::Ratio<i64>` satisfy it, which lets tests check those formulas without
//!   rounding.
//! - [`Real`] adds transcendental functions (`exp`, `ln`, `sqrt`) and is what the network and the
//!   standard-deviation estimators require. `f32` and `f64` implement it.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field element that can be built from small integers and literals.
pub trait Scalar: Num + PartialOrd + Copy + FromPrimitive + ToPrimitive + Debug {
    /// Converts a literal. Panics only if the literal is not representable, which never happens
    /// for the constants used in this crate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    /// `max` for partially ordered types. NaN handling follows `>`.
    #[inline]
    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    #[inline]
    fn abs_diff(a: Self, b: Self) -> Self {
        if a > b {
            a - b
        } else {
            b - a
        }
    }
}

impl<T> Scalar for T where T: Num + PartialOrd + Copy + FromPrimitive + ToPrimitive + Debug {}

/// Floating-point scalar used by the network, training and ensemble estimators.
pub trait Real: Scalar + Float + Display + Default + Sum + Send + Sync + 'static {}

impl<T> Real for T where T: Scalar + Float + Display + Default + Sum + Send + Sync + 'static {}
