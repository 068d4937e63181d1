//! Node densities on [-1, 1], quantile node families, and node spacing.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::optimize::bisect_increasing;
use crate::quadrature::GaussRule;
use crate::scalar::{from_usize, linear_fit, lit, tol, Real};
use crate::special::erf;

/// Default Gauss–Legendre order per panel for density integrals.
pub const DEFAULT_QUADRATURE_ORDER: usize = 32;
/// Number of equal panels used by the quadrature CDF.
pub const CDF_PANELS: usize = 64;

/// Which family a [`DensitySpec`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    /// `w(t) = 1/2`
    Uniform,
    /// `w(t) = 1 / (pi sqrt(1 - t^2))`
    Chebyshev,
    /// `w(t) = exp(-(t/s)^2) / (s sqrt(pi) erf(1/s))`
    TruncatedGaussian,
    /// Natural cubic spline through user samples, renormalised.
    Tabulated,
}

impl DensityKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Chebyshev => "chebyshev",
            Self::TruncatedGaussian => "truncated_gaussian",
            Self::Tabulated => "tabulated",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape<T> {
    Uniform,
    Chebyshev,
    Gaussian { scale: T, norm: T, erf_edge: T },
    Tabulated(Arc<Spline<T>>),
}

/// A positive probability density on [-1, 1].
#[derive(Clone, Debug)]
pub struct DensitySpec<T> {
    shape: Shape<T>,
    quadrature_order: usize,
    rule: Arc<GaussRule<T>>,
}

impl<T: PartialEq> PartialEq for DensitySpec<T> {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.quadrature_order == other.quadrature_order
    }
}

impl<T: Real> DensitySpec<T> {
    fn build(shape: Shape<T>, quadrature_order: usize) -> Result<Self> {
        if quadrature_order == 0 {
            return Err(Error::InvalidDensity("quadrature order must be positive".into()));
        }
        let spec = Self {
            shape,
            quadrature_order,
            rule: Arc::new(GaussRule::new(quadrature_order)),
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn uniform() -> Self {
        Self::build(Shape::Uniform, DEFAULT_QUADRATURE_ORDER).expect("uniform density is valid")
    }

    pub fn chebyshev() -> Self {
        Self::build(Shape::Chebyshev, DEFAULT_QUADRATURE_ORDER).expect("chebyshev density is valid")
    }

    /// Gaussian `exp(-(t/scale)^2)` restricted to [-1, 1] and normalised.
    /// `scale = 1` gives the density `exp(-t^2) / (sqrt(pi) erf(1))`.
    pub fn truncated_gaussian(scale: T) -> Result<Self> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(Error::InvalidDensity(format!("gaussian scale must be positive, got {scale}")));
        }
        let erf_edge = erf(T::one() / scale);
        let norm = scale * T::PI().sqrt() * erf_edge;
        Self::build(
            Shape::Gaussian {
                scale,
                norm,
                erf_edge,
            },
            DEFAULT_QUADRATURE_ORDER,
        )
    }

    /// Density interpolated by a natural cubic spline through `(ts, values)`
    /// and renormalised to unit mass. `ts` must start at -1, end at 1 and be
    /// strictly increasing.
    pub fn tabulated(ts: Vec<T>, values: Vec<T>) -> Result<Self> {
        let spline = Spline::new(ts, values)?;
        Self::build(Shape::Tabulated(Arc::new(spline)), DEFAULT_QUADRATURE_ORDER)
    }

    /// Looks a density up by name: `uniform`, `chebyshev`,
    /// `truncated_gaussian` (optional `[scale]`), or `tabulated`
    /// (`[t0, w0, t1, w1, ...]`).
    pub fn by_name(name: &str, params: &[T]) -> Result<Self> {
        match name {
            "uniform" | "chebyshev" if !params.is_empty() => Err(Error::InvalidDensity(format!(
                "{name} takes no parameters, got {}",
                params.len()
            ))),
            "uniform" => Ok(Self::uniform()),
            "chebyshev" => Ok(Self::chebyshev()),
            "truncated_gaussian" | "gaussian" => match params {
                [] => Self::truncated_gaussian(T::one()),
                [s] => Self::truncated_gaussian(*s),
                _ => Err(Error::InvalidDensity("truncated_gaussian takes at most one parameter (scale)".into())),
            },
            "tabulated" => {
                if !params.len().is_multiple_of(2) {
                    return Err(Error::InvalidDensity("tabulated parameters must be (t, w) pairs".into()));
                }
                let ts = params.iter().step_by(2).copied().collect();
                let ws = params.iter().skip(1).step_by(2).copied().collect();
                Self::tabulated(ts, ws)
            }
            other => Err(Error::InvalidDensity(format!("unknown density '{other}'"))),
        }
    }

    pub fn with_quadrature_order(self, order: usize) -> Result<Self> {
        Self::build(self.shape, order)
    }

    pub fn kind(&self) -> DensityKind {
        match self.shape {
            Shape::Uniform => DensityKind::Uniform,
            Shape::Chebyshev => DensityKind::Chebyshev,
            Shape::Gaussian { .. } => DensityKind::TruncatedGaussian,
            Shape::Tabulated(_) => DensityKind::Tabulated,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Parameters in the form accepted by [`DensitySpec::by_name`].
    pub fn params(&self) -> Vec<T> {
        match &self.shape {
            Shape::Uniform | Shape::Chebyshev => vec![],
            Shape::Gaussian { scale, .. } => vec![*scale],
            Shape::Tabulated(s) => s.ts.iter().zip(&s.ys).flat_map(|(&t, &y)| [t, y]).collect(),
        }
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub(crate) fn rule(&self) -> &GaussRule<T> {
        &self.rule
    }

    fn check(&self) -> Result<()> {
        for i in 0..=1000 {
            let t = lit::<T>(-1.0 + 2.0 * i as f64 / 1000.0);
            let v = self.value(t);
            if !(v > T::zero()) {
                return Err(Error::InvalidDensity(format!(
                    "{} density is not positive at t = {t} (w = {v})",
                    self.name()
                )));
            }
        }
        let mass = match self.shape {
            Shape::Chebyshev => T::one(),
            _ => self.cdf_quadrature(T::one()),
        };
        if (mass - T::one()).abs() > tol(1e-10) {
            return Err(Error::InvalidDensity(format!("{} density has mass {mass}", self.name())));
        }
        Ok(())
    }

    /// `w(t)` without the domain check.
    pub(crate) fn value(&self, t: T) -> T {
        match &self.shape {
            Shape::Uniform => lit(0.5),
            Shape::Chebyshev => {
                let r = T::one() - t * t;
                if r <= T::zero() {
                    T::infinity()
                } else {
                    T::one() / (T::PI() * r.sqrt())
                }
            }
            Shape::Gaussian { scale, norm, .. } => {
                let u = t / *scale;
                (-(u * u)).exp() / *norm
            }
            Shape::Tabulated(s) => s.eval(t),
        }
    }

    /// Density value `w(t)` for `t` in [-1, 1].
    pub fn eval(&self, t: T) -> Result<T> {
        if !(t.abs() <= T::one()) {
            return Err(domain("t", t));
        }
        Ok(self.value(t))
    }

    /// Cumulative mass on `[-1, x]`.
    pub fn cdf(&self, x: T) -> Result<T> {
        if !(x.abs() <= T::one()) {
            return Err(domain("x", x));
        }
        Ok(self.cdf_unchecked(x))
    }

    pub(crate) fn cdf_unchecked(&self, x: T) -> T {
        let two = lit::<T>(2.0);
        let v = match &self.shape {
            Shape::Uniform => (x + T::one()) / two,
            Shape::Chebyshev => lit::<T>(0.5) + x.asin() / T::PI(),
            Shape::Gaussian { scale, erf_edge, .. } => (erf(x / *scale) + *erf_edge) / (two * *erf_edge),
            Shape::Tabulated(_) => self.cdf_quadrature(x),
        };
        v.max(T::zero()).min(T::one())
    }

    /// Cumulative mass by composite Gauss–Legendre quadrature
    /// ([`CDF_PANELS`] panels of the configured order). This is the general
    /// path; closed forms are used by [`DensitySpec::cdf`] where available.
    /// Not meaningful for the Chebyshev density, whose endpoint singularity
    /// defeats the rule.
    pub fn cdf_quadrature(&self, x: T) -> T {
        let f = |t: T| self.value(t);
        self.rule.composite(&f, -T::one(), x, CDF_PANELS)
    }
}

/// Natural cubic spline, renormalised to unit mass on [-1, 1].
#[derive(Clone, Debug, PartialEq)]
struct Spline<T> {
    ts: Vec<T>,
    ys: Vec<T>,
    m: Vec<T>,
}

impl<T: Real> Spline<T> {
    fn new(ts: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if ts.len() != ys.len() || ts.len() < 2 {
            return Err(Error::InvalidDensity("tabulated density needs at least two (t, w) samples".into()));
        }
        if ts[0] != -T::one() || ts[ts.len() - 1] != T::one() {
            return Err(Error::InvalidDensity("tabulated samples must span exactly [-1, 1]".into()));
        }
        if ts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidDensity("tabulated abscissae must be strictly increasing".into()));
        }
        if ys.iter().any(|y| !(*y > T::zero()) || !y.is_finite()) {
            return Err(Error::InvalidDensity("tabulated values must be positive and finite".into()));
        }
        let m = natural_second_derivatives(&ts, &ys);
        let mut s = Self { ts, ys, m };
        // exact integral of the piecewise cubic
        let mut mass = T::zero();
        let twelve = lit::<T>(12.0);
        let two = lit::<T>(2.0);
        for j in 0..s.ts.len() - 1 {
            let h = s.ts[j + 1] - s.ts[j];
            mass = mass + h * (s.ys[j] + s.ys[j + 1]) / two - h * h * h * (s.m[j] + s.m[j + 1]) / twelve;
        }
        for y in s.ys.iter_mut() {
            *y = *y / mass;
        }
        for v in s.m.iter_mut() {
            *v = *v / mass;
        }
        Ok(s)
    }

    fn eval(&self, t: T) -> T {
        let j = match self.ts.partition_point(|&x| x <= t) {
            0 => 0,
            k => (k - 1).min(self.ts.len() - 2),
        };
        let h = self.ts[j + 1] - self.ts[j];
        let a = (self.ts[j + 1] - t) / h;
        let b = (t - self.ts[j]) / h;
        let six = lit::<T>(6.0);
        a * self.ys[j]
            + b * self.ys[j + 1]
            + ((a * a * a - a) * self.m[j] + (b * b * b - b) * self.m[j + 1]) * h * h / six
    }
}

fn natural_second_derivatives<T: Real>(ts: &[T], ys: &[T]) -> Vec<T> {
    let n = ts.len();
    let mut m = vec![T::zero(); n];
    if n < 3 {
        return m;
    }
    let two = lit::<T>(2.0);
    let six = lit::<T>(6.0);
    // Thomas algorithm on interior unknowns
    let mut c_prime = vec![T::zero(); n];
    let mut d_prime = vec![T::zero(); n];
    for i in 1..n - 1 {
        let h0 = ts[i] - ts[i - 1];
        let h1 = ts[i + 1] - ts[i];
        let a = h0;
        let b = two * (h0 + h1);
        let c = h1;
        let d = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = c / denom;
        d_prime[i] = (d - a * d_prime[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// How a [`NodeSet`] was produced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeSource {
    /// `cdf(x_i) = i/n` for the named density.
    Quantile { density: &'static str },
    Explicit,
    /// Chebyshev points of the first kind, `-cos((2i+1) pi / (2n+2))`.
    ChebyshevClosedForm,
    /// `x_i = -1 + 2i/n`.
    EquidistantClosedForm,
}

/// Strictly increasing interpolation nodes `x_0 < ... < x_n` in [-1, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet<T> {
    nodes: Vec<T>,
    source: NodeSource,
}

impl<T: Real> NodeSet<T> {
    fn checked(nodes: Vec<T>, source: NodeSource) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidNodes(format!("need at least 2 nodes, got {}", nodes.len())));
        }
        if let Some(x) = nodes.iter().find(|x| !(x.abs() <= T::one())) {
            return Err(domain("node", *x));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[0] < w[1])) {
            if nodes[i] == nodes[i + 1] {
                return Err(Error::CoincidentNodes { index: i, next: i + 1 });
            }
            return Err(Error::InvalidNodes(format!("nodes not increasing at index {i}")));
        }
        Ok(Self { nodes, source })
    }

    pub fn explicit(nodes: Vec<T>) -> Result<Self> {
        Self::checked(nodes, NodeSource::Explicit)
    }

    /// `n + 1` equidistant nodes including both endpoints.
    pub fn equidistant(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNodes("n must be at least 1".into()));
        }
        let nf = from_usize::<T>(n);
        let nodes = (0..=n)
            .map(|i| (from_usize::<T>(2 * i) - nf) / nf)
            .collect();
        Self::checked(nodes, NodeSource::EquidistantClosedForm)
    }

    /// `n + 1` Chebyshev points of the first kind (roots of `T_{n+1}`).
    /// They do not include the endpoints.
    pub fn chebyshev_first_kind(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNodes("n must be at least 1".into()));
        }
        let mut nodes = vec![T::zero(); n + 1];
        let denom = from_usize::<T>(2 * n + 2);
        for i in 0..=n / 2 {
            let x = -(from_usize::<T>(2 * i + 1) * T::PI() / denom).cos();
            nodes[i] = x;
            nodes[n - i] = -x;
        }
        if n.is_multiple_of(2) {
            nodes[n / 2] = T::zero();
        }
        Self::checked(nodes, NodeSource::ChebyshevClosedForm)
    }

    /// Degree `n` (the node count minus one).
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn source(&self) -> &NodeSource {
        &self.source
    }

    pub fn gaps(&self) -> impl Iterator<Item = T> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    pub fn min_gap(&self) -> T {
        self.gaps().fold(T::infinity(), T::min)
    }

    pub fn max_gap(&self) -> T {
        self.gaps().fold(T::zero(), T::max)
    }

    /// Index of a node exactly equal to `x`.
    pub fn position(&self, x: T) -> Option<usize> {
        if x.is_nan() {
            return None;
        }
        self.nodes.binary_search_by(|v| v.partial_cmp(&x).expect("nodes are finite")).ok()
    }
}

/// Quantile nodes `cdf(x_i) = i/n`, `i = 0..=n`, with `x_0 = -1`, `x_n = 1`.
///
/// Interior nodes are found by bisection to bracket width `1e-13` followed by
/// one Newton step using `w(x)`.
pub fn generate_nodes<T: Real>(spec: &DensitySpec<T>, n: usize) -> Result<NodeSet<T>> {
    if n == 0 {
        return Err(Error::InvalidNodes("n must be at least 1".into()));
    }
    let nf = from_usize::<T>(n);
    let interior: Result<Vec<T>> = (1..n)
        .into_par_iter()
        .map(|i| {
            let level = from_usize::<T>(i) / nf;
            let g = |x: T| spec.cdf_unchecked(x) - level;
            let (lo, hi) = (-T::one(), T::one());
            let mut x = bisect_increasing(&g, lo, hi, lit(1e-13));
            let w = spec.value(x);
            if w.is_finite() && w > T::zero() {
                let polished = x - g(x) / w;
                if polished > lo && polished < hi && g(polished).abs() <= g(x).abs() {
                    x = polished;
                }
            }
            let r = g(x).abs();
            if r > tol(1e-10) {
                return Err(Error::Nonconvergence {
                    level: level.to_f64().unwrap_or(f64::NAN),
                    reason: format!("cdf residual {r} after bisection"),
                });
            }
            Ok(x)
        })
        .collect();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(-T::one());
    nodes.extend(interior?);
    nodes.push(T::one());
    NodeSet::checked(nodes, NodeSource::Quantile { density: spec.name() })
}

/// `|n_[a,b] / (n+1) - int_a^b w|`: the interval-count discrepancy of the
/// node family against the density.
pub fn verify_obedience<T: Real>(nodes: &NodeSet<T>, spec: &DensitySpec<T>, a: T, b: T) -> Result<T> {
    if !(a < b) {
        return Err(Error::Precondition(format!("need a < b, got [{a}, {b}]")));
    }
    let mass = spec.cdf(b)? - spec.cdf(a)?;
    let count = nodes.nodes().iter().filter(|&&x| x >= a && x <= b).count();
    Ok((from_usize::<T>(count) / from_usize::<T>(nodes.n() + 1) - mass).abs())
}

/// Raw gap extremes of one node set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapSample<T> {
    pub n: usize,
    pub min_gap: T,
    pub max_gap: T,
}

/// Power-law envelope `a1 n^-b1 <= gap <= a2 n^-b2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpacingFit<T> {
    pub a1: T,
    pub b1: T,
    pub a2: T,
    pub b2: T,
}

impl<T: Real> SpacingFit<T> {
    pub fn lower(&self, n: usize) -> T {
        self.a1 * from_usize::<T>(n).powf(-self.b1)
    }

    pub fn upper(&self, n: usize) -> T {
        self.a2 * from_usize::<T>(n).powf(-self.b2)
    }
}

/// Gap statistics over one or more node sets.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacingProfile<T> {
    pub samples: Vec<GapSample<T>>,
    /// Smallest gap over all sets.
    pub min_gap: T,
    /// Largest gap over all sets.
    pub max_gap: T,
    /// Present when at least three distinct `n` were supplied.
    pub fit: Option<SpacingFit<T>>,
}

/// Gap extremes per set and, for sweeps of at least three distinct `n`, a
/// least-squares power-law fit whose prefactors are then adjusted so that
/// the envelope holds exactly on every set of the sweep.
pub fn spacing_profile<T: Real>(sets: &[NodeSet<T>]) -> Result<SpacingProfile<T>> {
    if sets.is_empty() {
        return Err(Error::Precondition("spacing profile needs at least one node set".into()));
    }
    let samples: Vec<GapSample<T>> = sets
        .iter()
        .map(|s| GapSample {
            n: s.n(),
            min_gap: s.min_gap(),
            max_gap: s.max_gap(),
        })
        .collect();
    let min_gap = samples.iter().map(|s| s.min_gap).fold(T::infinity(), T::min);
    let max_gap = samples.iter().map(|s| s.max_gap).fold(T::zero(), T::max);
    let mut distinct: Vec<usize> = samples.iter().map(|s| s.n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let fit = if distinct.len() >= 3 {
        let logn: Vec<T> = samples.iter().map(|s| from_usize::<T>(s.n).ln()).collect();
        let lmin: Vec<T> = samples.iter().map(|s| s.min_gap.ln()).collect();
        let lmax: Vec<T> = samples.iter().map(|s| s.max_gap.ln()).collect();
        let (s1, _) = linear_fit(&logn, &lmin).expect("distinct n");
        let (s2, _) = linear_fit(&logn, &lmax).expect("distinct n");
        let (b1, b2) = (-s1, -s2);
        let slack = T::epsilon() * lit(16.0);
        let a1 = samples
            .iter()
            .map(|s| s.min_gap * from_usize::<T>(s.n).powf(b1))
            .fold(T::infinity(), T::min)
            * (T::one() - slack);
        let a2 = samples
            .iter()
            .map(|s| s.max_gap * from_usize::<T>(s.n).powf(b2))
            .fold(T::zero(), T::max)
            * (T::one() + slack);
        Some(SpacingFit { a1, b1, a2, b2 })
    } else {
        None
    };
    Ok(SpacingProfile {
        samples,
        min_gap,
        max_gap,
        fit,
    })
}
