//! Finite zeros of the barycentric denominator `D(z) = sum_k w_k / (z - x_k)`,
//! i.e. the poles of the interpolant.
//!
//! `P(z) = sum_k w_k prod_{i != k} (z - x_i)` is expanded in monomials with
//! double-double accumulation, vanishing leading coefficients are trimmed,
//! and the roots are taken as eigenvalues of the balanced companion matrix,
//! then refined together by Aberth steps on `P`
//! evaluated through `D`.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex;

use crate::barycentric::WeightSet;
use crate::density::NodeSet;
use crate::error::{Error, Result};

/// Largest degree accepted by [`denominator_roots`].
pub const MAX_ROOT_DEGREE: usize = 64;

/// Relative size below which a leading coefficient is treated as cancelled.
const TRIM: f64 = 1e-9;

/// Trim level for exact data: well above the double-double rounding of the
/// expansion.
const EXACT_TRIM: f64 = 1e-26;

/// Relative `D` residual above which an on-interval root is discarded.
pub const ROOT_RESIDUAL: f64 = 1e-8;

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: e }
    }

    fn quick(a: f64, b: f64) -> Self {
        let s = a + b;
        Self { hi: s, lo: b - (s - a) }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        let t = Self::two_sum(self.lo, o.lo);
        let u = Self::quick(s.hi, s.lo + t.hi);
        Self::quick(u.hi, u.lo + t.lo)
    }

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::quick(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 {
            self.neg()
        } else {
            self
        }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Recovered poles with the relative residual
/// `|D(p)| / sum_k |w_k / (p - x_k)|` of each.
#[derive(Clone, Debug, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Complex<f64>>,
    pub residual_norms: Vec<f64>,
    /// `true` for roots with `|Im| <= 1e-9` inside [-1, 1] that passed the
    /// residual filter.
    pub on_interval: Vec<bool>,
    /// Degree of `P` after trimming cancelled leading coefficients.
    pub degree: usize,
    /// Spurious roots removed by the filter.
    pub discarded: usize,
}

impl PoleSet {
    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_norms.iter().copied().fold(0.0, f64::max)
    }
}

/// Monomial coefficients (constant first) of `P` and of `sum_k |w_k| prod |.|`,
/// the latter used as the cancellation scale.
fn expand(xs: &[Dd], w: &[Dd]) -> (Vec<Dd>, Vec<f64>) {
    let n = xs.len() - 1;
    let mut coef = vec![Dd::default(); n + 1];
    let mut scale = vec![0.0; n + 1];
    #[allow(clippy::needless_range_loop)]
    for k in 0..=n {
        // prod_{i != k} (z - x_i), degree n
        let mut poly = vec![Dd::default(); n + 1];
        poly[0] = Dd::new(1.0);
        let mut deg = 0;
        for (i, &xi) in xs.iter().enumerate() {
            if i == k {
                continue;
            }
            let m = xi.neg();
            for j in (0..=deg + 1).rev() {
                let shifted = if j > 0 { poly[j - 1] } else { Dd::default() };
                poly[j] = shifted.add(poly[j].mul(m));
            }
            deg += 1;
        }
        let wk = w[k];
        for j in 0..=n {
            let t = poly[j].mul(wk);
            coef[j] = coef[j].add(t);
            scale[j] += t.abs().to_f64();
        }
    }
    (coef, scale)
}

/// Parlett–Reinsch balancing by powers of two, in place.
fn balance(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    let radix = 2.0f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let g = r / radix;
            while cc < g {
                f *= radix;
                cc *= radix * radix;
            }
            let g = r * radix;
            while cc > g {
                f /= radix;
                cc /= radix * radix;
            }
            if (cc + r / f) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// `D(z)`, `D'(z)` and `sum |w_k / (z - x_k)|`.
fn eval_d(xs: &[f64], w: &[f64], z: Complex<f64>) -> (Complex<f64>, Complex<f64>, f64) {
    let mut d = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    let mut mag = 0.0;
    for (&x, &wk) in xs.iter().zip(w) {
        let inv = Complex::new(1.0, 0.0) / (z - x);
        let t = inv * wk;
        d += t;
        dp -= t * inv;
        mag += t.norm();
    }
    (d, dp, mag)
}

/// Eigenvalues via the real Schur form, retried on shifted copies since
/// unshifted QR can stall on spectra symmetric about the origin.
fn companion_eigenvalues(c: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    let n = c.nrows();
    for sigma in [0.0, 0.123_456_7, -0.371_2] {
        let shifted = c + DMatrix::identity(n, n) * sigma;
        if let Some(s) = Schur::try_new(shifted, f64::EPSILON, SCHUR_MAX_ITER) {
            return Some(s.complex_eigenvalues().iter().map(|z| z - sigma).collect());
        }
    }
    None
}

/// Simultaneous Aberth refinement of all roots of `P = l D`, with
/// `l(z) = prod (z - x_i)`, so `P'/P = sum 1/(z - x_i) + D'/D` comes from
/// the barycentric form and never touches the monomial coefficients.
fn aberth(xs: &[f64], w: &[f64], roots: &mut [Complex<f64>]) {
    let m = roots.len();
    for _ in 0..ABERTH_STEPS {
        let mut moved = false;
        for j in 0..m {
            let z = roots[j];
            let (d, dp, _) = eval_d(xs, w, z);
            let mut logd = dp / d;
            for &x in xs {
                logd += Complex::new(1.0, 0.0) / (z - x);
            }
            let ratio = Complex::new(1.0, 0.0) / logd;
            let mut repel = Complex::new(0.0, 0.0);
            for (k, &zk) in roots.iter().enumerate() {
                if k != j {
                    repel += Complex::new(1.0, 0.0) / (z - zk);
                }
            }
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repel);
            if !(step.re.is_finite() && step.im.is_finite()) {
                continue;
            }
            roots[j] = z - step;
            if step.norm() > 4.0 * f64::EPSILON * z.norm().max(1.0) {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

const ABERTH_STEPS: usize = 100;

const SCHUR_MAX_ITER: usize = 10_000;

fn dd_vec(v: &[f64]) -> Vec<Dd> {
    v.iter().map(|&x| Dd::new(x)).collect()
}

fn check_degree(n: usize) -> Result<()> {
    if n > MAX_ROOT_DEGREE {
        return Err(Error::PoleRecovery(format!(
            "degree {n} exceeds the supported maximum {MAX_ROOT_DEGREE} for monomial expansion"
        )));
    }
    Ok(())
}

/// The finite zeros of `D` for weights on at most 65 nodes.
///
/// Nodes and weights are taken as exact binary data, but weights computed in
/// floating point carry rounding that keeps cancelled leading coefficients
/// of `P` near `1e-16` of their scale; those below `1e-9` of it are trimmed.
pub fn denominator_roots(nodes: &NodeSet<f64>, ws: &WeightSet<f64>) -> Result<PoleSet> {
    let xs = nodes.nodes();
    if ws.len() != xs.len() {
        return Err(Error::Precondition(format!("{} nodes but {} weights", xs.len(), ws.len())));
    }
    check_degree(nodes.n())?;
    let w = ws.scaled();
    let (coef, scale) = expand(&dd_vec(xs), &dd_vec(w));
    solve(xs, w, &coef, &scale, TRIM, 1.0)
}

/// Poles for exact integer weights `|w_k|` with signs `(-1)^k` on `n + 1`
/// equidistant nodes.
///
/// Works in `t = n x`, where the nodes are the integers `2k - n`, so both
/// nodes and weights enter the double-double expansion without rounding and
/// only coefficients at its own noise level are trimmed.
pub fn alternating_integer_roots(abs_weights: &[u128]) -> Result<PoleSet> {
    if abs_weights.len() < 2 {
        return Err(Error::Precondition("need at least two weights".into()));
    }
    let n = abs_weights.len() - 1;
    check_degree(n)?;
    let top = *abs_weights.iter().max().unwrap();
    if top == 0 {
        return Err(Error::PoleRecovery("all weights vanish".into()));
    }
    // scale by a power of two near max |w|, exactly
    let shift = 127 - top.leading_zeros() as i32;
    let unit = 2f64.powi(-shift);
    let wdd: Vec<Dd> = abs_weights
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let hi = a as f64;
            let lo = if (hi as u128) >= a { -(((hi as u128) - a) as f64) } else { (a - hi as u128) as f64 };
            let v = Dd::quick(hi * unit, lo * unit);
            if k % 2 == 0 { v } else { v.neg() }
        })
        .collect();
    let ts: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 - n as f64).collect();
    let w: Vec<f64> = wdd.iter().map(|d| d.to_f64()).collect();
    let (coef, scale) = expand(&dd_vec(&ts), &wdd);
    solve(&ts, &w, &coef, &scale, EXACT_TRIM, 1.0 / n as f64)
}

/// Roots of the expanded `P` in the working variable, refined there and
/// reported as `x = to_x * t`.
fn solve(xs: &[f64], w: &[f64], coef: &[Dd], scale: &[f64], trim: f64, to_x: f64) -> Result<PoleSet> {
    let n = xs.len() - 1;
    let top_scale = scale.iter().copied().fold(0.0, f64::max);
    if top_scale == 0.0 {
        return Err(Error::PoleRecovery("all weights vanish".into()));
    }
    let mut degree = n;
    while degree > 0 && coef[degree].to_f64().abs() <= trim * scale[degree].max(f64::MIN_POSITIVE) {
        degree -= 1;
    }
    if degree == 0 && coef[0].to_f64().abs() <= trim * scale[0] {
        return Err(Error::PoleRecovery("P vanishes identically up to rounding".into()));
    }
    let lead = coef[degree].to_f64();
    let mut raw = Vec::with_capacity(degree);
    if degree > 0 {
        let mut c = DMatrix::<f64>::zeros(degree, degree);
        for j in 0..degree {
            c[(0, j)] = -coef[degree - 1 - j].to_f64() / lead;
        }
        for i in 1..degree {
            c[(i, i - 1)] = 1.0;
        }
        balance(&mut c);
        raw = companion_eigenvalues(&c).unwrap_or_else(|| {
            // QR stalled on every shift: Aberth from a circle enclosing the roots
            let radius = (0..degree)
                .map(|j| (coef[j].to_f64() / lead).abs().powf(1.0 / (degree - j) as f64))
                .fold(0.0, f64::max)
                * 2.0;
            (0..degree)
                .map(|j| Complex::from_polar(radius.max(1.5), 0.4 + std::f64::consts::TAU * j as f64 / degree as f64))
                .collect()
        });
    }
    let mut out = PoleSet {
        poles: Vec::new(),
        residual_norms: Vec::new(),
        on_interval: Vec::new(),
        degree,
        discarded: 0,
    };
    // non-finite eigenvalues restart from a circle outside the interval
    let span = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    for (j, z) in raw.iter_mut().enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) {
            *z = Complex::from_polar(1.5 * span, 0.4 + j as f64);
        }
    }
    aberth(xs, w, &mut raw);
    for t in raw {
        let (d, _, mag) = eval_d(xs, w, t);
        let residual = if mag > 0.0 && mag.is_finite() { d.norm() / mag } else { f64::INFINITY };
        let z = t * to_x;
        let inside = z.im.abs() <= 1e-9 && z.re.abs() <= 1.0;
        if inside && !(residual <= ROOT_RESIDUAL) {
            out.discarded += 1;
            continue;
        }
        out.poles.push(z);
        out.residual_norms.push(residual);
        out.on_interval.push(inside);
    }
    // deterministic order: by real part, then imaginary part
    let mut idx: Vec<usize> = (0..out.poles.len()).collect();
    idx.sort_by(|&a, &b| {
        let (p, q) = (out.poles[a], out.poles[b]);
        p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im))
    });
    out.poles = idx.iter().map(|&i| out.poles[i]).collect();
    out.residual_norms = idx.iter().map(|&i| out.residual_norms[i]).collect();
    out.on_interval = idx.iter().map(|&i| out.on_interval[i]).collect();
    Ok(out)
}

/// `|P(p)|` relative to the largest coefficient of `P`, for each recovered
/// pole (a check independent of the `D` residual).
pub fn numerator_residuals(nodes: &NodeSet<f64>, ws: &WeightSet<f64>, poles: &PoleSet) -> Vec<f64> {
    let xs = nodes.nodes();
    let w = ws.scaled();
    let (coef, _) = expand(&dd_vec(xs), &dd_vec(w));
    let c: Vec<f64> = coef.iter().map(|d| d.to_f64()).collect();
    let cmax = c.iter().map(|v| v.abs()).fold(0.0, f64::max);
    poles
        .poles
        .iter()
        .map(|&z| {
            let mut acc = Complex::new(0.0, 0.0);
            for &cj in c[..=poles.degree].iter().rev() {
                acc = acc * z + cj;
            }
            acc.norm() / cmax
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barycentric::{weights_from_nodes, Normalization};
    use crate::potential::{ExternalField, Pole};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn matched(found: &[Complex<f64>], expected: &[Complex<f64>], tol: f64) {
        assert_eq!(found.len(), expected.len(), "{found:?} vs {expected:?}");
        for e in expected {
            let best = found.iter().map(|f| (f - e).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= tol, "{e} not recovered: {found:?}");
        }
    }

    #[test]
    fn double_double_keeps_low_bits() {
        let a = Dd::new(1.0).add(Dd::new(1e-20));
        let b = a.add(Dd::new(-1.0));
        assert_eq!(b.to_f64(), 1e-20);
        let third = Dd::new(1.0 / 3.0);
        let p = third.mul(Dd::new(3.0)).add(Dd::new(-1.0));
        assert_eq!(p.to_f64(), (1.0f64 / 3.0).mul_add(3.0, -1.0));
    }

    #[test]
    fn berrut_three_nodes() {
        let ns = NodeSet::explicit(vec![-1.0, 0.0, 1.0]).unwrap();
        let ws = WeightSet::from_values(&[1.0, -1.0, 1.0], Normalization::Raw).unwrap();
        let p = denominator_roots(&ns, &ws).unwrap();
        assert_eq!(p.degree, 2);
        matched(&p.poles, &[Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)], 1e-10);
    }

    #[test]
    fn berrut_four_nodes() {
        let ns = NodeSet::equidistant(3).unwrap();
        let ws = WeightSet::from_values(&[1.0, -1.0, 1.0, -1.0], Normalization::Raw).unwrap();
        let p = denominator_roots(&ns, &ws).unwrap();
        // P = sum (-1)^k prod_{i != k}(z - x_i) = -(2/3)(3 z^2 + 1)... check via D
        assert_eq!(p.len(), 2);
        assert_abs_diff_eq!(p.poles[0].im, -p.poles[1].im, epsilon = 1e-12);
        assert!(p.poles.iter().all(|z| z.im.abs() > 0.1));
        assert!(p.max_residual() <= 1e-10);
    }

    #[test]
    fn polynomial_weights_have_no_poles() {
        for n in [4, 10, 20] {
            let ns = NodeSet::equidistant(n).unwrap();
            let ws = weights_from_nodes(&ns, &ExternalField::None, Normalization::MaxOne).unwrap();
            let p = denominator_roots(&ns, &ws).unwrap();
            assert_eq!(p.degree, 0);
            assert!(p.is_empty());
        }
    }

    fn bernstein_rho(z: Complex<f64>) -> f64 {
        let s = (z * z - 1.0).sqrt();
        (z + s).norm().max((z - s).norm())
    }

    fn round_trip(ns: &NodeSet<f64>, poles: &[Pole<f64>]) -> (f64, f64, f64) {
        let field = ExternalField::poles(poles.to_vec()).unwrap();
        let ws = weights_from_nodes(ns, &field, Normalization::MaxOne).unwrap();
        let p = denominator_roots(ns, &ws).unwrap();
        assert_eq!(p.len(), poles.len(), "{:?}", p.poles);
        let err = poles
            .iter()
            .map(|q| p.poles.iter().map(|z| (z - q.at).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        let pres = numerator_residuals(ns, &ws, &p).into_iter().fold(0.0, f64::max);
        (err, p.max_residual(), pres)
    }

    #[test]
    fn explicit_poles_round_trip() {
        let sets: Vec<Vec<Pole<f64>>> = vec![
            vec![Pole::new(0.0, 0.5, 1), Pole::new(0.0, -0.5, 1)],
            vec![Pole::new(0.3, 0.2, 1), Pole::new(0.3, -0.2, 1), Pole::new(1.1, 0.0, 1)],
            vec![
                Pole::new(-0.4, 0.3, 1),
                Pole::new(-0.4, -0.3, 1),
                Pole::new(0.6, 0.1, 1),
                Pole::new(0.6, -0.1, 1),
                Pole::new(0.0, 0.6, 1),
                Pole::new(0.0, -0.6, 1),
            ],
        ];
        for poles in &sets {
            for n in [8, 14, 20] {
                for ns in [NodeSet::chebyshev_first_kind(n).unwrap(), NodeSet::equidistant(n).unwrap()] {
                    let (err, dres, pres) = round_trip(&ns, poles);
                    assert!(err <= 1e-8 && dres <= 1e-8 && pres <= 1e-8, "n={n}: {err:e} {dres:e} {pres:e}");
                }
            }
        }
    }

    #[test]
    fn far_poles_keep_small_residuals() {
        // recovery error grows like eps * rho^n; the residual does not
        let ns = NodeSet::chebyshev_first_kind(20).unwrap();
        let (err, dres, _) = round_trip(&ns, &[Pole::new(0.3, 0.2, 1), Pole::new(0.3, -0.2, 1), Pole::new(1.5, 0.0, 1)]);
        assert!(dres <= 1e-8);
        assert!(err <= 1e3 * f64::EPSILON * bernstein_rho(Complex::new(1.5, 0.0)).powi(20));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_near_interval(
            n in 6usize..=20,
            raw in prop::collection::vec((-1.0f64..1.0, 0.05f64..0.6), 1..=3),
        ) {
            let mut poles = Vec::new();
            for (re, im) in raw {
                let z = Complex::new(re, im);
                if bernstein_rho(z) > 1.8 || poles.iter().any(|p: &Pole<f64>| (p.at - z).norm() < 0.1) {
                    continue;
                }
                poles.push(Pole::new(re, im, 1));
                poles.push(Pole::new(re, -im, 1));
            }
            prop_assume!(!poles.is_empty());
            let ns = NodeSet::chebyshev_first_kind(n).unwrap();
            let (err, dres, pres) = round_trip(&ns, &poles);
            prop_assert!(err <= 1e-8, "error {err:e}");
            prop_assert!(dres <= 1e-8 && pres <= 1e-8);
        }
    }

    #[test]
    fn integer_path_agrees_with_float_path() {
        let p = alternating_integer_roots(&[1, 1, 1]).unwrap();
        matched(&p.poles, &[Complex::new(0.0, 1.0), Complex::new(0.0, -1.0)], 1e-14);
        for (n, w) in [(5usize, vec![1u128, 2, 2, 2, 2, 1]), (8, vec![1, 3, 4, 4, 4, 4, 4, 3, 1])] {
            let exact = alternating_integer_roots(&w).unwrap();
            let ns = NodeSet::equidistant(n).unwrap();
            let signed: Vec<f64> = w.iter().enumerate().map(|(k, &a)| if k % 2 == 0 { a as f64 } else { -(a as f64) }).collect();
            let ws = WeightSet::from_values(&signed, Normalization::Raw).unwrap();
            let float = denominator_roots(&ns, &ws).unwrap();
            assert_eq!(exact.degree, float.degree);
            matched(&float.poles, &exact.poles, 1e-10);
        }
        // binomial weights are polynomial: no poles
        assert!(alternating_integer_roots(&[1, 4, 6, 4, 1]).unwrap().is_empty());
    }

    #[test]
    fn degree_cap() {
        let ns = NodeSet::equidistant(65).unwrap();
        let ws = weights_from_nodes(&ns, &ExternalField::None, Normalization::MaxOne).unwrap();
        assert!(matches!(denominator_roots(&ns, &ws), Err(Error::PoleRecovery(_))));
    }
}
