//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the factorization, graph and metric code is generic over.
///
/// Implemented for `f32` and `f64`. Anything needing `sqrt`, `exp` or `acos`
/// rules out exact/rational types, so none are provided.
pub trait Scalar:
    NdFloat + FloatConst + FromPrimitive + ToPrimitive + Default + Sum + Debug + Display + 'static
{
    /// Converts an `f64` literal or measurement into `Self`.
    fn of(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("f64 is representable in every Scalar")
    }

    /// Widens to `f64` (lossless for both implementors).
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("Scalar widens to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
