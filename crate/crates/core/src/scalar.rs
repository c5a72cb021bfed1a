//! Scalar abstraction for the numeric core.
//!
//! Everything under [`crate::linalg`], [`crate::special`], [`crate::autodiff`],
//! [`crate::twosample`] and [`crate::pca`] is generic over [`Real`] so the same
//! code instantiates at `f32` and `f64`. The pipelines use the `f64` aliases at
//! the crate root.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Shorthand for converting an `f64` literal into `Self`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Lossy view as `f64` (exact for `f64`, widening for `f32`).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
