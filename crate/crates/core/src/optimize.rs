//! One-dimensional search helpers: golden-section maximisation and a
//! bracketing root finder.

use crate::scalar::{lit, Real};

/// Maximises `f` on `[a, b]` by golden-section search until the bracket is
/// narrower than `width`. The endpoints are compared against the interior
/// estimate so that boundary maxima are returned exactly.
pub fn golden_max<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, width: T) -> (T, T) {
    let (mut lo, mut hi) = if a <= b { (a, b) } else { (b, a) };
    let inv_phi = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > width && iters < 300 {
        iters += 1;
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Scans `f` on the sorted sample points `xs`, then refines the best
/// three-point bracket with [`golden_max`]. Ties go to the smaller `x`.
pub fn scan_and_refine_max<T: Real, F: Fn(T) -> T>(f: &F, xs: &[T], width: T) -> (T, T) {
    assert!(!xs.is_empty());
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (i, &x) in xs.iter().enumerate() {
        let v = f(x);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let lo = xs[best.saturating_sub(1)];
    let hi = xs[(best + 1).min(xs.len() - 1)];
    if hi <= lo {
        return (xs[best], best_v);
    }
    let (x, v) = golden_max(f, lo, hi, width);
    if v >= best_v {
        (x, v)
    } else {
        (xs[best], best_v)
    }
}

/// Result of [`find_increasing_root`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root<T> {
    pub x: T,
    pub residual: T,
}

/// Finds the zero of an increasing function `f` on `[lo, hi]` with
/// `f(lo) < 0 < f(hi)`, using Newton steps on `df` safeguarded by
/// bisection. Stops once `|f| <= ftol` or the bracket collapses.
pub fn find_increasing_root<T: Real, F, D>(f: &F, df: &D, mut lo: T, mut hi: T, ftol: T) -> Root<T>
where
    F: Fn(T) -> T,
    D: Fn(T) -> T,
{
    let mut x = (lo + hi) / lit(2.0);
    let mut best = Root {
        x,
        residual: T::infinity(),
    };
    for _ in 0..400 {
        let v = f(x);
        if v.abs() < best.residual {
            best = Root { x, residual: v.abs() };
        }
        if v.abs() <= ftol {
            break;
        }
        if v < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = df(x);
        let newton = x - v / d;
        x = if d > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            mid
        };
    }
    best
}

/// Bisection for an increasing function `f` on `[lo, hi]` to bracket width
/// `width` (or until the bracket stops shrinking).
pub fn bisect_increasing<T: Real, F: Fn(T) -> T>(f: &F, mut lo: T, mut hi: T, width: T) -> T {
    while hi - lo > width {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / lit(2.0)
}
