//! Scalar abstraction shared by the numeric modules.
//!
//! Exact evaluation, the game solvers and the trajectory analytics are written
//! against [`Scalar`] so they run in `f32` or `f64`. The sampling layer and the
//! learners are concrete in `f64`, which is what the random number streams emit.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and tolerances.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Index of the smallest element; ties go to the lowest index.
pub fn argmin<T: PartialOrd + Copy>(xs: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some((_, b)) if !(x < b) => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// Index of the largest element; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &x) in xs.iter().enumerate() {
        match best {
            Some((_, b)) if !(x > b) => {}
            _ => best = Some((i, x)),
        }
    }
    best.map(|(i, _)| i)
}

/// Checks that `w` has length `len`, nonnegative entries and unit sum within `tol`.
pub fn check_simplex<T: Scalar>(w: &[T], len: usize, tol: f64, what: &str) -> crate::Result<()> {
    if w.len() != len {
        return crate::error::validation(format!("{what}: expected length {len}, got {}", w.len()));
    }
    let tol_t = T::of(tol);
    let mut sum = T::zero();
    for (i, &x) in w.iter().enumerate() {
        if !x.is_finite() || x < -tol_t {
            return crate::error::validation(format!("{what}: entry {i} = {x} is not a probability"));
        }
        sum = sum + x;
    }
    if (sum - T::one()).abs() > tol_t {
        return crate::error::validation(format!("{what}: entries sum to {sum}, not 1"));
    }
    Ok(())
}
