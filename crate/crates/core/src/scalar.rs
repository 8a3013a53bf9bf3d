//! Scalar abstraction shared by the metric, decomposition and reweighing code.
//!
//! Everything that is a ratio of counts or an average of losses is written
//! against [`Scalar`], so the same code path runs in `f64` for production use
//! and in exact rational arithmetic when identities must hold with zero
//! residual.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Numeric type usable by the generic parts of the crate.
///
/// Implemented automatically for every type that satisfies the bounds,
/// notably `f32`, `f64`, `Rational64` and `BigRational`.
pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// `num / den` computed in the scalar type.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    fn half() -> Self {
        Self::ratio(1, 2)
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value representable in scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num
        + Signed
        + FromPrimitive
        + ToPrimitive
        + Clone
        + PartialOrd
        + Debug
        + Send
        + Sync
        + 'static
{
}

/// Sum in index order, so floating-point results do not depend on scheduling.
pub fn ordered_sum<'a, T: Scalar>(values: impl IntoIterator<Item = &'a T>) -> T {
    values
        .into_iter()
        .fold(T::zero(), |acc, v| acc + v.clone())
}

/// Arithmetic mean of a non-empty slice.
pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        None
    } else {
        Some(ordered_sum(values) / T::from_count(values.len()))
    }
}
