//! Gauss–Legendre rules, composite panels, and dyadically graded panels for
//! integrands with a (weak) singularity at one end.

use crate::scalar::{lit, Real};

/// An n-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    /// Builds the rule by Newton iteration on the three-term recurrence.
    /// Nodes are computed in `f64` and converted.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self {
            nodes: nodes.into_iter().map(lit).collect(),
            weights: weights.into_iter().map(lit).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[a, b]` with a single panel.
    pub fn integrate<F: Fn(T) -> T>(&self, f: &F, a: T, b: T) -> T {
        let half = (b - a) / lit(2.0);
        let mid = (a + b) / lit(2.0);
        let mut s = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            s = s + w * f(mid + half * x);
        }
        s * half
    }

    /// Integral over `[a, b]` split into `panels` equal panels.
    pub fn composite<F: Fn(T) -> T>(&self, f: &F, a: T, b: T, panels: usize) -> T {
        let h = (b - a) / lit(panels as f64);
        (0..panels)
            .map(|k| {
                let lo = a + h * lit(k as f64);
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(f, lo, hi)
            })
            .sum()
    }

    /// Integral of `g(s)` over `s in [0, length]`, using panels
    /// `[length/2^(k+1), length/2^k]` for `k < levels` plus a final panel
    /// `[0, length/2^levels]`. Suited to integrands like `s log s` or
    /// `log(s^2 + y^2)` that are smooth relative to the distance from 0.
    pub fn graded<F: Fn(T) -> T>(&self, g: &F, length: T, levels: usize) -> T {
        if length <= T::zero() {
            return T::zero();
        }
        let mut hi = length;
        let mut total = T::zero();
        for _ in 0..levels {
            let lo = hi / lit(2.0);
            total = total + self.integrate(g, lo, hi);
            hi = lo;
        }
        total + self.integrate(g, T::zero(), hi)
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
