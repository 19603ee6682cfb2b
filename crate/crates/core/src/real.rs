//! Scalar abstraction for the numeric core.
//!
//! Every kinematics/actuation/plant routine in this crate is generic over a
//! floating-point scalar so the same math runs in `f32` or `f64`. The crate
//! root re-exports `f64` aliases of the domain types, which is what the
//! config loader, experiment harness, and CLI use.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the math core is generic over: `f32` or `f64`.
pub trait Real: RealField + FromPrimitive + ToPrimitive + Copy + Default {}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` constant (literals, config values) into the working scalar.
#[inline]
pub fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("constant not representable in scalar type")
}

/// Widen to `f64` for reporting and serialization.
#[inline]
pub fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64().expect("scalar not representable as f64")
}

/// `true` when `v` is neither NaN nor infinite.
///
/// `RealField` has no finiteness query; `v - v` is zero exactly for finite
/// values and NaN for NaN/infinities.
#[inline]
#[allow(clippy::eq_op)]
pub fn is_finite<T: Real>(v: T) -> bool {
    v - v == T::zero()
}
