//! Error function.

use crate::scalar::{lit, Real};

/// Gauss error function.
///
/// Uses the everywhere-positive series
/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_k (2x^2)^k x / (2k+1)!!`,
/// which has no cancellation, and saturates to `±1` for `|x| >= 6`
/// where `erfc(6) < 3e-17`.
pub fn erf<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let ax = x.abs();
    if ax >= lit(6.0) {
        return x.signum();
    }
    let two_x2 = lit::<T>(2.0) * ax * ax;
    let mut term = ax;
    let mut sum = ax;
    let mut k = 0usize;
    while k < 1000 {
        k += 1;
        term = term * two_x2 / lit::<T>((2 * k + 1) as f64);
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
    }
    let v = lit::<T>(2.0) / T::PI().sqrt() * (-(ax * ax)).exp() * sum;
    v.min(T::one()).copysign_like(x)
}

trait CopySignLike {
    fn copysign_like(self, sign: Self) -> Self;
}

impl<T: Real> CopySignLike for T {
    fn copysign_like(self, sign: T) -> T {
        if sign < T::zero() {
            -self
        } else {
            self
        }
    }
}
