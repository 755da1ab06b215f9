//! Scalar abstraction shared by every numerical module.
//!
//! Estimators, density families, the optimizer and the test battery are all
//! written against [`Real`], so they run unchanged on `f32` or `f64`.
//! Tail probabilities that need double precision (incomplete gamma/beta)
//! are evaluated in `f64` and converted back.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Days per year used for every day/year conversion.
pub const DAYS_PER_YEAR: f64 = 365.25;

#[inline]
pub fn days_to_years<T: Real>(days: T) -> T {
    days / T::lit(DAYS_PER_YEAR)
}

#[inline]
pub fn years_to_days<T: Real>(years: T) -> T {
    years * T::lit(DAYS_PER_YEAR)
}

/// Total order for floats that sorts NaN last.
#[inline]
pub(crate) fn total_cmp<T: Real>(a: &T, b: &T) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}
