//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point type the simulator is generic over (`f32` or `f64`).
pub trait Real:
    'static
    + Copy
    + Send
    + Sync
    + Default
    + Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + LowerExp
{
    /// Tolerance for unit-norm and probability identities.
    fn unit_tol() -> Self;

    /// Tolerance for unitarity of constructed matrices.
    fn unitary_tol() -> Self;

    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn unit_tol() -> Self {
        1e-12
    }

    fn unitary_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn unit_tol() -> Self {
        1e-5
    }

    fn unitary_tol() -> Self {
        1e-5
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees<T: Real>(deg: T) -> T {
    let full = T::lit(360.0);
    let w = deg % full;
    let w = if w < T::zero() { w + full } else { w };
    // -tiny % 360 + 360 rounds to 360
    if w >= full {
        T::zero()
    } else {
        w
    }
}
