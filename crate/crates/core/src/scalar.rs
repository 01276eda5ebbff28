//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the schemes are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of) any finite `f64`.
    #[inline]
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 literal")
    }

    #[inline]
    fn of_i64(value: i64) -> Self {
        Self::from_i64(value).expect("integer fits the scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Negative part `(|x| - x) / 2`.
    #[inline]
    fn neg_part(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            Self::zero()
        }
    }

    /// Positive part `(|x| + x) / 2`.
    #[inline]
    fn pos_part(self) -> Self {
        if self > Self::zero() {
            self
        } else {
            Self::zero()
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_reassemble() {
        for x in [-2.5f64, -0.0, 0.0, 1.25] {
            assert_eq!(x.pos_part() - x.neg_part(), x);
            assert_eq!(x.pos_part() + x.neg_part(), x.abs());
        }
    }

    #[test]
    fn literal_conversion_f32() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(f32::of_i64(-3), -3.0f32);
    }
}
