//! Scalar abstraction for the math kernels: f32 or f64.

use num_traits as nt;

/// Floating-point scalar the analytic kernels are generic over.
pub trait Real:
    nt::Float
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::ToPrimitive
    + nt::NumAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lifting an f64 literal into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
