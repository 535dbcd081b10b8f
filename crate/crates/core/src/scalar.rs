//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every value used this way is representable.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// 2D point or vector; 1D quantities use the first component only.
pub type Point<T> = [T; 2];

#[inline]
pub(crate) fn sub<T: Real>(a: Point<T>, b: Point<T>) -> Point<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn cross<T: Real>(a: Point<T>, b: Point<T>) -> T {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub(crate) fn norm<T: Real>(a: Point<T>) -> T {
    a[0].hypot(a[1])
}

/// Surface measure of the unit sphere in dimension `dim` (2 in 1D, 2π in 2D).
pub fn unit_sphere_measure<T: Real>(dim: usize) -> T {
    match dim {
        1 => T::lit(2.0),
        _ => T::lit(2.0) * T::PI(),
    }
}

/// Neumaier-compensated running sum; order-dependent but deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

pub fn compensated_sum<T: Real>(it: impl IntoIterator<Item = T>) -> T {
    let mut acc = CompensatedSum::new();
    for x in it {
        acc.add(x);
    }
    acc.value()
}
