//! Scalar abstraction shared by the model, losses and data pipeline.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point element type accepted by every numeric container in the crate.
///
/// Implemented for `f32` and `f64`. Literals are written through [`Scalar::lit`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Convert an `f64` constant into this type.
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 constant representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Probability floor used inside every logarithm.
    fn prob_floor() -> Self;
}

impl Scalar for f64 {
    fn prob_floor() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    // 1e-12 is representable in f32 (normal range ends near 1.2e-38).
    fn prob_floor() -> Self {
        1e-12
    }
}
