//! Scalar abstraction for the numeric core.
//!
//! All signal processing and learning code is generic over [`Real`], so the
//! same routines run in `f32` or `f64`. The crate root exports `f64` aliases,
//! which are what the experiment harness uses.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating point scalar usable throughout the crate.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Display + Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used when constants or random draws are
    /// produced in double precision.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 conversion")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + NumAssign + Sum + Display + Debug + Send + Sync + 'static
{
}
