//! Scalar abstraction shared by the linear-algebra, channel and codec layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar usable throughout the simulator: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance attainable at this precision for a nominal `f64` tolerance.
    ///
    /// `f64` returns the value unchanged; `f32` floors it at `1e-5`.
    fn tol(nominal: f64) -> Self;

    /// Converts a literal. Infallible for the finite constants used in this crate.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn tol(nominal: f64) -> Self {
        nominal
    }
}

impl Real for f32 {
    fn tol(nominal: f64) -> Self {
        nominal.max(1e-5) as f32
    }
}
