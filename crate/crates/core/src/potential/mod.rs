//! Logarithmic potentials: the continuous potential `U = U_w + phi` of a
//! density plus external field, and the discrete potential `U_n` of a node
//! set plus `phi_n`.

mod field;

pub use field::{BuiltinField, ExternalField, FieldKind, Pole};

use num_complex::Complex;
use rayon::prelude::*;

use crate::density::{DensityKind, DensitySpec, NodeSet};
use crate::error::{domain, Error, Result};
use crate::optimize::scan_and_refine_max;
use crate::scalar::{from_usize, lit, tol, xlogx, Real};

/// Dyadic refinement levels used by the log-singular quadrature.
const GRADED_LEVELS: usize = 40;

/// `U_w(x) = int log(1/|x - t|) w(t) dt` for `x` in [-1, 1].
///
/// Closed forms are used for the uniform and Chebyshev densities; other
/// densities go through [`log_potential_quadrature`].
pub fn log_potential<T: Real>(spec: &DensitySpec<T>, x: T) -> Result<T> {
    if !(x.abs() <= T::one()) {
        return Err(domain("x", x));
    }
    Ok(log_potential_at(spec, Complex::new(x, T::zero())))
}

/// `U_w(z)` anywhere in the complex plane.
pub fn log_potential_at<T: Real>(spec: &DensitySpec<T>, z: Complex<T>) -> T {
    match spec.kind() {
        DensityKind::Uniform => uniform_potential(z),
        DensityKind::Chebyshev => chebyshev_potential(z),
        _ => quadrature_potential(spec, z),
    }
}

/// `U_w` by singularity subtraction and graded Gauss–Legendre panels, for
/// any density except Chebyshev (whose endpoint singularity is not
/// integrable by the rule). Exposed so the closed forms can be checked
/// against it.
pub fn log_potential_quadrature<T: Real>(spec: &DensitySpec<T>, x: T) -> Result<T> {
    if !(x.abs() <= T::one()) {
        return Err(domain("x", x));
    }
    if spec.kind() == DensityKind::Chebyshev {
        return Err(Error::Precondition("quadrature path does not apply to the chebyshev density".into()));
    }
    Ok(quadrature_potential(spec, Complex::new(x, T::zero())))
}

fn uniform_potential<T: Real>(z: Complex<T>) -> T {
    let half = lit::<T>(0.5);
    if z.im == T::zero() {
        let x = z.re;
        let a = x + T::one();
        let b = x - T::one();
        // (x+1) log|x+1| - (x-1) log|x-1|, with 0 log 0 = 0
        let ta = if a == T::zero() { T::zero() } else { a * a.abs().ln() };
        let tb = if b == T::zero() { T::zero() } else { b * b.abs().ln() };
        return T::one() - half * (ta - tb);
    }
    let one = Complex::new(T::one(), T::zero());
    let a = z + one;
    let b = z - one;
    T::one() - half * (a * a.ln() - b * b.ln()).re
}

fn chebyshev_potential<T: Real>(z: Complex<T>) -> T {
    let ln2 = T::LN_2();
    if z.im == T::zero() && z.re.abs() <= T::one() {
        return ln2;
    }
    let one = Complex::new(T::one(), T::zero());
    let s = (z * z - one).sqrt();
    let r = (z + s).norm().max((z - s).norm());
    ln2 - r.ln()
}

fn quadrature_potential<T: Real>(spec: &DensitySpec<T>, z: Complex<T>) -> T {
    let rule = spec.rule();
    let (x, y) = (z.re, z.im);
    let one = T::one();
    if y == T::zero() && x.abs() <= one {
        let wx = spec.value(x);
        let analytic = wx * (xlogx(one + x) + xlogx(one - x) - lit(2.0));
        let left = |s: T| s.ln() * (spec.value(x - s) - wx);
        let right = |s: T| s.ln() * (spec.value(x + s) - wx);
        let integral = analytic + rule.graded(&left, one + x, GRADED_LEVELS) + rule.graded(&right, one - x, GRADED_LEVELS);
        return -integral;
    }
    // off the interval: integrand is smooth but peaked near Re z
    let c = x.max(-one).min(one);
    let y2 = y * y;
    let half = lit::<T>(0.5);
    let left = |s: T| {
        let t = c - s;
        half * ((x - t) * (x - t) + y2).ln() * spec.value(t)
    };
    let right = |s: T| {
        let t = c + s;
        half * ((x - t) * (x - t) + y2).ln() * spec.value(t)
    };
    -(rule.graded(&left, one + c, GRADED_LEVELS) + rule.graded(&right, one - c, GRADED_LEVELS))
}

/// `dU_w/dx` for `x` in (-1, 1). Infinite at the endpoints for densities
/// that do not vanish there.
pub(crate) fn log_potential_slope<T: Real>(spec: &DensitySpec<T>, x: T) -> T {
    let one = T::one();
    let half = lit::<T>(0.5);
    match spec.kind() {
        DensityKind::Uniform => -half * ((one + x).ln() - (one - x).ln()),
        DensityKind::Chebyshev => T::zero(),
        _ => {
            // U_w'(x) = -PV int w(t)/(x - t) dt
            let rule = spec.rule();
            let wx = spec.value(x);
            let left = |s: T| (spec.value(x - s) - wx) / s;
            let right = |s: T| -(spec.value(x + s) - wx) / s;
            let pv = rule.graded(&left, one + x, GRADED_LEVELS)
                + rule.graded(&right, one - x, GRADED_LEVELS)
                + wx * ((one + x).ln() - (one - x).ln());
            -pv
        }
    }
}

/// `d^2 U_w / dx^2`: closed forms for uniform and Chebyshev, otherwise a
/// central difference of the slope with step `1e-6 max(1, |x|)`.
pub(crate) fn log_potential_curvature<T: Real>(spec: &DensitySpec<T>, x: T) -> T {
    let one = T::one();
    match spec.kind() {
        DensityKind::Uniform => -lit::<T>(0.5) * (one / (one + x) + one / (one - x)),
        DensityKind::Chebyshev => T::zero(),
        _ => {
            let h = lit::<T>(1e-6) * x.abs().max(one);
            let lo = (x - h).max(-one);
            let hi = (x + h).min(one);
            (log_potential_slope(spec, hi) - log_potential_slope(spec, lo)) / (hi - lo)
        }
    }
}

/// The continuous potential `U(x) = U_w(x) + phi(x)` on [-1, 1].
#[derive(Clone, Debug)]
pub struct ContinuousPotential<T> {
    density: DensitySpec<T>,
    field: ExternalField<T>,
}

impl<T: Real> ContinuousPotential<T> {
    /// Pole fields are rejected: their limit depends on how the pole count
    /// grows with `n`; pass the limit as a builtin field instead.
    pub fn new(density: DensitySpec<T>, field: ExternalField<T>) -> Result<Self> {
        if field.kind() == FieldKind::Poles {
            return Err(Error::InvalidField(
                "continuous potential needs a limit field (none, functional or equilibrium), not explicit poles".into(),
            ));
        }
        let u = Self { density, field };
        for i in 0..=400 {
            let x = lit::<T>(-1.0 + i as f64 / 200.0);
            let v = u.value(x);
            if !v.is_finite() {
                return Err(Error::InvalidField(format!("continuous potential is not finite at {x}")));
            }
        }
        if let ExternalField::Equilibrium { u_bar, density: fd } = &u.field {
            if *fd == u.density {
                for i in 0..=100 {
                    let x = lit::<T>(-1.0 + i as f64 / 50.0);
                    let dev = (u.value(x) - *u_bar).abs();
                    if dev > tol(1e-8) {
                        return Err(Error::InvalidField(format!(
                            "equilibrium identity violated by {dev} at x = {x}"
                        )));
                    }
                }
            }
        }
        Ok(u)
    }

    pub fn density(&self) -> &DensitySpec<T> {
        &self.density
    }

    pub fn field(&self) -> &ExternalField<T> {
        &self.field
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if !(x.abs() <= T::one()) {
            return Err(domain("x", x));
        }
        Ok(self.value(x))
    }

    pub(crate) fn value(&self, x: T) -> T {
        log_potential_at(&self.density, Complex::new(x, T::zero())) + self.field.limit_value(x)
    }
}

/// Location and value of the extrema of `U` on [-1, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialExtrema<T> {
    pub x_max: T,
    pub x_min: T,
    pub u_max: T,
    pub u_min: T,
    /// `u_max - u_min`
    pub d: T,
}

impl<T: Real> PotentialExtrema<T> {
    /// `rho = exp(d)`.
    pub fn rho(&self) -> T {
        self.d.exp()
    }
}

/// Default scan resolution for [`potential_extrema`].
pub const EXTREMA_GRID: usize = 2001;

/// Extrema of `U` by a uniform scan followed by golden-section refinement of
/// the best bracket, to bracket width `1e-10`.
pub fn potential_extrema<T: Real>(u: &ContinuousPotential<T>, grid_size: usize) -> Result<PotentialExtrema<T>> {
    if grid_size < 101 {
        return Err(Error::Precondition(format!("grid_size must be at least 101, got {grid_size}")));
    }
    let last = from_usize::<T>(grid_size - 1);
    let xs: Vec<T> = (0..grid_size)
        .map(|i| -T::one() + lit::<T>(2.0) * from_usize::<T>(i) / last)
        .collect();
    let values: Vec<T> = xs.par_iter().map(|&x| u.value(x)).collect();
    let lookup = |x: T| match xs.binary_search_by(|v| v.partial_cmp(&x).expect("finite grid")) {
        Ok(i) => values[i],
        Err(_) => u.value(x),
    };
    let width = lit::<T>(1e-10);
    let (x_max, u_max) = scan_and_refine_max(&lookup, &xs, width);
    let neg = |x: T| -lookup(x);
    let (x_min, neg_min) = scan_and_refine_max(&neg, &xs, width);
    let u_min = -neg_min;
    Ok(PotentialExtrema {
        x_max,
        x_min,
        u_max,
        u_min,
        d: (u_max - u_min).max(T::zero()),
    })
}

/// The discrete potential
/// `U_n(z) = sum_i log(1/|z - x_i|) / (n + 1) + phi_n(z)`.
#[derive(Clone, Debug)]
pub struct DiscretePotential<T> {
    nodes: NodeSet<T>,
    field: ExternalField<T>,
}

impl<T: Real> DiscretePotential<T> {
    /// The potential is defined for any pole count; the `m <= n` degree
    /// condition is enforced where weights are built.
    pub fn new(nodes: NodeSet<T>, field: ExternalField<T>) -> Result<Self> {
        Ok(Self { nodes, field })
    }

    pub fn nodes(&self) -> &NodeSet<T> {
        &self.nodes
    }

    pub fn field(&self) -> &ExternalField<T> {
        &self.field
    }

    pub fn n(&self) -> usize {
        self.nodes.n()
    }

    /// `U_n(x)` on the real line; `+inf` exactly at nodes.
    pub fn eval(&self, x: T) -> T {
        self.eval_complex(Complex::new(x, T::zero()))
    }

    /// `U_n(z)`; `+inf` at nodes, `-inf` at poles.
    pub fn eval_complex(&self, z: Complex<T>) -> T {
        if z.im == T::zero() && self.nodes.position(z.re).is_some() {
            return T::infinity();
        }
        let n = self.n();
        let s: T = self.nodes.nodes().iter().map(|&x| (z - x).norm().ln()).sum();
        -s / from_usize::<T>(n + 1) + self.field.value(z, n)
    }

    /// First (`order = 1`) or second (`order = 2`) derivative of `U_n`.
    pub fn deriv(&self, x: T, order: u8) -> Result<T> {
        if self.nodes.position(x).is_some() {
            return Err(Error::AtNode {
                x: x.to_f64().unwrap_or(f64::NAN),
            });
        }
        if order != 1 && order != 2 {
            return Err(Error::Precondition(format!("derivative order must be 1 or 2, got {order}")));
        }
        Ok(self.deriv_unchecked(x, order))
    }

    pub(crate) fn deriv_unchecked(&self, x: T, order: u8) -> T {
        let n = self.n();
        let s: T = if order == 1 {
            self.nodes.nodes().iter().map(|&xi| -T::one() / (x - xi)).sum()
        } else {
            self.nodes
                .nodes()
                .iter()
                .map(|&xi| {
                    let d = x - xi;
                    T::one() / (d * d)
                })
                .sum()
        };
        s / from_usize::<T>(n + 1) + self.field.deriv(x, n, order)
    }
}

/// `U_n` sampled on a rectangular grid of the complex plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid<T> {
    pub re: Vec<T>,
    pub im: Vec<T>,
    /// Row-major: `values[j * re.len() + i]` is `U_n(re[i] + i im[j])`.
    pub values: Vec<T>,
}

impl<T: Real> ComplexGrid<T> {
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[j * self.re.len() + i]
    }

    /// `(re, im, u)` triples in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        self.im
            .iter()
            .flat_map(move |&y| self.re.iter().map(move |&x| (x, y)))
            .zip(&self.values)
            .map(|((x, y), &u)| (x, y, u))
    }
}

fn linspace<T: Real>(range: (T, T), count: usize) -> Vec<T> {
    let last = from_usize::<T>(count - 1);
    (0..count)
        .map(|i| {
            if i + 1 == count {
                range.1
            } else {
                range.0 + (range.1 - range.0) * from_usize::<T>(i) / last
            }
        })
        .collect()
}

/// Evaluates `U_n` on an `nx` by `ny` grid over `re_range x im_range`.
pub fn complex_grid_sample<T: Real>(
    un: &DiscretePotential<T>,
    re_range: (T, T),
    im_range: (T, T),
    nx: usize,
    ny: usize,
) -> Result<ComplexGrid<T>> {
    if nx < 2 || ny < 2 {
        return Err(Error::Precondition(format!("grid needs nx, ny >= 2, got {nx} x {ny}")));
    }
    let re = linspace(re_range, nx);
    let im = linspace(im_range, ny);
    let values: Vec<T> = im
        .par_iter()
        .flat_map_iter(|&y| re.iter().map(move |&x| un.eval_complex(Complex::new(x, y))).collect::<Vec<_>>())
        .collect();
    Ok(ComplexGrid { re, im, values })
}
