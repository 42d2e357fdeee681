use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the kinematics are generic over: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Step used by the central-difference Jacobian.
    fn fd_step() -> Self;

    /// Tolerance below which a singular value counts as zero.
    fn singular_tolerance() -> Self;
}

impl Real for f64 {
    fn fd_step() -> Self {
        1e-6
    }

    fn singular_tolerance() -> Self {
        1e-12
    }
}

impl Real for f32 {
    fn fd_step() -> Self {
        1e-3
    }

    fn singular_tolerance() -> Self {
        1e-6
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(value: f64) -> T {
    nalgebra::convert(value)
}

#[inline]
pub(crate) fn to_f64<T: Real>(value: T) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}
