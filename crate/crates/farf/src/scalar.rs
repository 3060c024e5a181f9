//! Scalar abstraction so the learners run on `f32` or `f64` unchanged.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used for feature values, weighted counts and
/// every derived statistic. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossless conversion from an instance count.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as scalar")
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + Sum
        + Default
        + Debug
        + Display
        + Serialize
        + DeserializeOwned
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` constant into the working scalar type.
pub fn cast<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("constant representable as scalar")
}
