//! Scalar abstraction for the raster math.
//!
//! Every raster type and operation is generic over [`Real`], so the same
//! code runs in `f32` for file-backed pipelines and in `f64` where tests
//! want more headroom. Statistics (means, sums of squares, regressions)
//! always accumulate in `f64` regardless of the plane scalar.

use std::fmt::{Debug, Display};
use std::ops::AddAssign;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + AddAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Narrowing conversion from an `f64` constant or accumulator.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Widening conversion for accumulation.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real widens to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
