//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that touches parameters or encodings is written against
//! [`Scalar`], so the same code runs in `f32` for quick sweeps and `f64` for
//! training and gradient checks.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equal-length slices.
pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub fn norm<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// In-place softmax with max subtraction. Entries where `mask` is false get
/// probability zero; at least one entry must be unmasked.
pub fn masked_softmax<T: Scalar>(scores: &mut [T], mask: impl Fn(usize) -> bool) {
    let max = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| mask(*i))
        .map(|(_, &s)| s)
        .fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (i, s) in scores.iter_mut().enumerate() {
        if mask(i) {
            *s = (*s - max).exp();
            total = total + *s;
        } else {
            *s = T::zero();
        }
    }
    for s in scores.iter_mut() {
        *s = *s / total;
    }
}

pub fn softmax<T: Scalar>(scores: &mut [T]) {
    masked_softmax(scores, |_| true)
}
