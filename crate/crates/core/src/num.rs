//! Scalar abstraction shared by the signal, feature and metric layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point sample type: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Arithmetic mean, `None` for an empty slice. Accumulates offsets from the first value,
/// so a constant slice yields that constant exactly.
pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    let x0 = *xs.first()?;
    let n = T::from_usize(xs.len())?;
    Some(x0 + xs.iter().map(|&x| x - x0).sum::<T>() / n)
}

/// Population standard deviation, `None` for an empty slice.
pub fn population_std<T: Scalar>(xs: &[T]) -> Option<T> {
    let x0 = *xs.first()?;
    let n = T::from_usize(xs.len())?;
    let m = xs.iter().map(|&x| x - x0).sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - x0 - m) * (x - x0 - m)).sum::<T>() / n;
    Some(var.sqrt())
}

/// Median of the values; sorts a copy. `None` for an empty slice.
pub fn median<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / T::of(2.0)
    })
}

/// Linear-interpolated percentile (`q` in `[0, 1]`) of already sorted data.
pub fn percentile_sorted<T: Scalar>(sorted: &[T], q: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::of(pos - lo as f64);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}
