use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the crate: `f32` or `f64`.
///
/// All numerics are written against this trait. Tolerances quoted in the
/// documentation are for `f64`; with `f32` they are floored at a small
/// multiple of machine epsilon (see [`tol`]).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Sum
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Tolerance `x`, floored at 64 ulps of one for low precision types.
#[inline]
pub fn tol<T: Real>(x: f64) -> T {
    let floor = T::epsilon() * lit(64.0);
    let t = lit::<T>(x);
    if t < floor {
        floor
    } else {
        t
    }
}

/// `x * ln(x)` with the limit value 0 at `x = 0`.
#[inline]
pub fn xlogx<T: Real>(x: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x * x.ln()
    }
}

/// Numerically stable `ln(sum(exp(v)))`. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = v.iter().map(|&a| (a - m).exp()).sum();
    m + s.ln()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> Option<(T, T)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = from_usize::<T>(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
    }
    if sxx <= T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_large_arguments() {
        let v = [1000.0_f64, 1000.0];
        assert!((log_sum_exp(&v) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp::<f64>(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let (s, c) = linear_fit(&x, &y).unwrap();
        assert!((s - 3.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn tolerance_floor_for_f32() {
        assert!(tol::<f32>(1e-12) > 1e-6);
        assert_eq!(tol::<f64>(1e-10), 1e-10);
    }
}
