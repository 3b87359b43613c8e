//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

pub use crate::double_double::DoubleDouble;
pub use crate::octuple::Octuple;

/// Floating point scalar: `f32`, `f64`, [`DoubleDouble`] or [`Octuple`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Panics only for non-representable input,
    /// which cannot happen for the implementors.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    /// Lossy conversion used for reports and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    /// Relative spacing of representable values near 1.
    #[inline]
    fn unit_roundoff() -> Self {
        Self::epsilon()
    }

    /// Default absolute integration tolerance. Wide types need tolerances far
    /// below `1e-12` to resolve passages close to the saddle at `u = 0`.
    #[inline]
    fn default_atol() -> Self {
        Self::lit(1e-12).max(Self::unit_roundoff())
    }

    /// Exact conversion to [`Octuple`].
    #[inline]
    fn widen(self) -> Octuple {
        Octuple::from_f64(self.as_f64())
    }

    /// Nearest value to an [`Octuple`].
    #[inline]
    fn narrow(x: Octuple) -> Self {
        Self::lit(x.to_f64())
    }
}

impl Real for f32 {}
impl Real for f64 {}

impl Real for DoubleDouble {
    fn default_atol() -> Self {
        Self::lit(1e-30)
    }

    fn widen(self) -> Octuple {
        Octuple::from_f64(self.hi()) + Octuple::from_f64(self.lo())
    }

    fn narrow(x: Octuple) -> Self {
        let hi = x.to_f64();
        if !hi.is_finite() {
            return Self::from_f64(hi);
        }
        Self::from_parts(hi, (x - Octuple::from_f64(hi)).to_f64())
    }
}

impl Real for Octuple {
    fn default_atol() -> Self {
        Self::from_f64(1e-40)
    }

    fn widen(self) -> Octuple {
        self
    }

    fn narrow(x: Octuple) -> Self {
        x
    }
}
