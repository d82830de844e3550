//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable by the analysis and synthesis code: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Sum
    + Default
    + Display
    + Debug
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly rounded)
    /// in both supported scalar types, so this never fails.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits the scalar type")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize fits the scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Median of a slice; `None` when empty. NaNs sort last.
pub(crate) fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Greater));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::lit(2.0)
    })
}

/// Vertex offset (in samples, within [-0.5, 0.5] for a true local maximum) and
/// height of the parabola through three equally spaced points.
pub(crate) fn parabolic_vertex<T: Real>(left: T, center: T, right: T) -> (T, T) {
    let denom = left - T::lit(2.0) * center + right;
    if denom.abs() <= T::epsilon() * (left.abs() + center.abs() + right.abs()) || !denom.is_finite()
    {
        return (T::zero(), center);
    }
    let delta = T::lit(0.5) * (left - right) / denom;
    let delta = delta.max(-T::one()).min(T::one());
    let height = center - T::lit(0.25) * (left - right) * delta;
    (delta, height)
}
