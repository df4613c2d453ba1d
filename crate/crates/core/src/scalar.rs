//! Scalar abstraction shared by every numerical kernel.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solver can be instantiated with.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts from a count or index.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `max(0, x)`
    #[inline]
    fn pos(self) -> Self {
        self.max(Self::zero())
    }

    /// `max(0, -x)`
    #[inline]
    fn neg_part(self) -> Self {
        (-self).max(Self::zero())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// A point or vector in the plane.
pub type Vec2<T> = [T; 2];

#[inline]
pub fn dot<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm<T: Real>(a: Vec2<T>) -> T {
    a[0].hypot(a[1])
}

#[inline]
pub fn norm_sq<T: Real>(a: Vec2<T>) -> T {
    a[0] * a[0] + a[1] * a[1]
}

#[inline]
pub fn add<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub<T: Real>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale<T: Real>(s: T, a: Vec2<T>) -> Vec2<T> {
    [s * a[0], s * a[1]]
}

/// The in-plane cross product with an out-of-plane field of unit strength,
/// `v × e₃ = (v₂, −v₁)`.
#[inline]
pub fn cross_e3<T: Real>(v: Vec2<T>) -> Vec2<T> {
    [v[1], -v[0]]
}

/// Sums a slice in fixed-size chunks so that the reduction order does not
/// depend on how rayon schedules the work.
pub fn det_sum<T: Real>(values: &[T]) -> T {
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    if values.len() <= CHUNK {
        return values.iter().copied().fold(T::zero(), |a, b| a + b);
    }
    let partial: Vec<T> = values
        .par_chunks(CHUNK)
        .map(|c| c.iter().copied().fold(T::zero(), |a, b| a + b))
        .collect();
    partial.into_iter().fold(T::zero(), |a, b| a + b)
}

/// Deterministic dot product of two equally sized slices.
pub fn det_dot<T: Real>(a: &[T], b: &[T]) -> T {
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= CHUNK {
        return a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y);
    }
    let partial: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).fold(T::zero(), |s, (&p, &q)| s + p * q))
        .collect();
    partial.into_iter().fold(T::zero(), |s, v| s + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_serial_for_exact_values() {
        let v: Vec<f64> = (0..10_000).map(|i| i as f64).collect();
        assert_eq!(det_sum(&v), 49_995_000.0);
        assert_eq!(det_dot(&v[..3], &[1.0, 1.0, 1.0]), 3.0);
    }

    #[test]
    fn parts() {
        assert_eq!(2.0f64.pos(), 2.0);
        assert_eq!((-2.0f64).pos(), 0.0);
        assert_eq!((-2.0f64).neg_part(), 2.0);
        assert_eq!(cross_e3([1.0f32, 0.0]), [0.0, -1.0]);
    }
}
