//! Scalar abstraction for the phase-space engine.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the Gaussian engine is generic over.
///
/// Implemented for `f32`, `f64` and the double-double [`twofloat::TwoFloat`].
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal or parameter.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite f64 converts to every Real")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    /// Division at the full working precision of the type.
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
}

impl Real for f32 {}
impl Real for f64 {}
// The num-traits conversions of TwoFloat default to integer round trips.
impl Real for twofloat::TwoFloat {
    fn lit(x: f64) -> Self {
        twofloat::TwoFloat::from(x)
    }

    fn as_f64(self) -> f64 {
        self.hi() + self.lo()
    }

    // The crate's quotient carries ~1e-17 relative error; one residual step
    // restores double-double accuracy.
    fn quot(self, rhs: Self) -> Self {
        let q = self / rhs;
        q + (self - q * rhs) / rhs
    }
}
