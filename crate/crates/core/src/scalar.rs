//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Real floating point type the spectral pipeline is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that are stated for double
/// precision are rescaled for narrower types through [`Scalar::tolerance_scale`].
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// `sqrt(eps(Self) / eps(f64))`; exactly 1 for `f64`.
    fn tolerance_scale() -> Self {
        let ratio = Self::epsilon().as_f64() / f64::EPSILON;
        Self::c(ratio.sqrt())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
