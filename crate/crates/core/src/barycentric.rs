//! Barycentric weights in the log domain, the second-form interpolant, the
//! Lagrange basis and the Lebesgue function.
//!
//! Weight magnitudes scale like `exp((n + 1) U)` and leave floating point
//! range quickly, so only `log|w_k|` is stored. Evaluation shifts by the
//! largest log weight first.
//!
//! Weights built from nodes and a conjugate-symmetric pole field (or no field)
//! define a rational interpolant whose denominator is known in closed form:
//!
//! ```text
//! sum_k w_k / (x - x_k) = prod_j (x - p_j)^m_j / prod_i (x - x_i)
//! ```
//!
//! For those weights the Lebesgue function is evaluated through that identity
//! in the log domain. This keeps full relative accuracy even when `Lambda_n`
//! is far beyond `1 / eps`, where the second form cancels catastrophically.

use rayon::prelude::*;

use crate::density::NodeSet;
use crate::error::{Error, Result};
use crate::optimize::scan_and_refine_max;
use crate::potential::{ExternalField, Pole};
use crate::scalar::{from_usize, lit, log_sum_exp, Real};

/// Choice of the free constant `C` in `w_k = C (-1)^k exp((n+1) phi_n(x_k)) / prod |x_k - x_i|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// `C = 1`.
    #[default]
    Raw,
    /// `C` chosen so that `max |w_k| = 1`.
    MaxOne,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::MaxOne => "max_one",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "raw" => Ok(Self::Raw),
            "max_one" => Ok(Self::MaxOne),
            other => Err(Error::Precondition(format!("unknown normalization '{other}'"))),
        }
    }
}

/// Where a weight set came from, which decides how the Lebesgue function
/// is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightOrigin<T> {
    /// Built from nodes and the listed poles (possibly none), conjugate
    /// symmetric and with `m <= n`.
    Rational(Vec<Pole<T>>),
    /// Anything else: functional or equilibrium fields, explicit weights.
    Opaque,
}

/// Barycentric weights `w_k = sign_k exp(log_abs_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet<T> {
    signs: Vec<i8>,
    log_abs: Vec<T>,
    normalization: Normalization,
    log_scale: T,
    origin: WeightOrigin<T>,
    // log|w_k| before normalization; all evaluation goes through this so
    // results do not depend on the normalization bit for bit
    raw: Vec<T>,
    raw_max: T,
    // sign_k exp(raw_k - raw_max)
    scaled: Vec<T>,
}

impl<T: Real> WeightSet<T> {
    fn build(signs: Vec<i8>, raw: Vec<T>, normalization: Normalization, origin: WeightOrigin<T>) -> Self {
        let raw_max = raw.iter().copied().fold(T::neg_infinity(), T::max);
        let log_scale = match normalization {
            Normalization::Raw => T::zero(),
            Normalization::MaxOne => -raw_max,
        };
        let log_abs = raw.iter().map(|&r| r + log_scale).collect();
        let scaled = signs
            .iter()
            .zip(&raw)
            .map(|(&s, &r)| {
                let m = (r - raw_max).exp();
                if s < 0 {
                    -m
                } else {
                    m
                }
            })
            .collect();
        Self {
            signs,
            log_abs,
            normalization,
            log_scale,
            origin,
            raw,
            raw_max,
            scaled,
        }
    }

    /// Weights given by sign and `log|w_k|` (taken as raw, `C = 1`).
    pub fn from_log_abs(signs: Vec<i8>, log_abs: Vec<T>, normalization: Normalization) -> Result<Self> {
        if signs.len() != log_abs.len() || signs.len() < 2 {
            return Err(Error::Precondition(format!(
                "need matching sign and magnitude vectors of length >= 2, got {} and {}",
                signs.len(),
                log_abs.len()
            )));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::Precondition("signs must be +1 or -1".into()));
        }
        if let Some(k) = log_abs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("log|w_{k}| is not finite")));
        }
        Ok(Self::build(signs, log_abs, normalization, WeightOrigin::Opaque))
    }

    /// Weights given as plain signed values; all must be non-zero.
    pub fn from_values(values: &[T], normalization: Normalization) -> Result<Self> {
        let signs = values.iter().map(|&v| if v < T::zero() { -1 } else { 1 }).collect();
        let log_abs = values.iter().map(|v| v.abs().ln()).collect();
        Self::from_log_abs(signs, log_abs, normalization)
    }

    pub fn with_normalization(&self, normalization: Normalization) -> Self {
        Self::build(self.signs.clone(), self.raw.clone(), normalization, self.origin.clone())
    }

    pub fn n(&self) -> usize {
        self.signs.len() - 1
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    /// `log|w_k|` after normalization.
    pub fn log_abs(&self) -> &[T] {
        &self.log_abs
    }

    /// `log|w_k|` with `C = 1`.
    pub fn raw_log_abs(&self) -> &[T] {
        &self.raw
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// `log C`: zero for raw weights, `-max log|w_k|` for `max_one`.
    pub fn log_scale(&self) -> T {
        self.log_scale
    }

    pub fn origin(&self) -> &WeightOrigin<T> {
        &self.origin
    }

    /// Signed weights `sign_k exp(log_abs_k)`; may overflow for large `n`.
    pub fn values(&self) -> Vec<T> {
        self.signs
            .iter()
            .zip(&self.log_abs)
            .map(|(&s, &l)| if s < 0 { -l.exp() } else { l.exp() })
            .collect()
    }

    /// Signed weights divided by `max |w_k|`.
    pub fn scaled(&self) -> &[T] {
        &self.scaled
    }
}

fn conjugate_symmetric<T: Real>(poles: &[Pole<T>]) -> bool {
    let mult = |z: num_complex::Complex<T>| -> usize {
        poles.iter().filter(|p| p.at == z).map(|p| p.multiplicity).sum()
    };
    poles
        .iter()
        .filter(|p| p.at.im != T::zero())
        .all(|p| mult(p.at) == mult(p.at.conj()))
}

/// `log|w_k| = (n + 1) phi_n(x_k) - sum_{i != k} log|x_k - x_i|`, signs `(-1)^k`.
pub fn weights_from_nodes<T: Real>(
    nodes: &NodeSet<T>,
    field: &ExternalField<T>,
    normalization: Normalization,
) -> Result<WeightSet<T>> {
    let n = nodes.n();
    field.check_degree(n)?;
    let xs = nodes.nodes();
    if let Some(i) = xs.windows(2).position(|w| w[0] == w[1]) {
        return Err(Error::CoincidentNodes { index: i, next: i + 1 });
    }
    let raw: Vec<T> = xs
        .par_iter()
        .enumerate()
        .map(|(k, &xk)| {
            let denom: T = xs
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &xi)| (xk - xi).abs().ln())
                .sum();
            field.log_numerator(xk, n) - denom
        })
        .collect();
    if let Some(k) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidField(format!("field is not finite at node x_{k} = {}", xs[k])));
    }
    let signs = (0..=n).map(|k| if k % 2 == 0 { 1 } else { -1 }).collect();
    let origin = match field {
        ExternalField::None => WeightOrigin::Rational(Vec::new()),
        ExternalField::Poles(p) if conjugate_symmetric(p) => WeightOrigin::Rational(p.clone()),
        _ => WeightOrigin::Opaque,
    };
    Ok(WeightSet::build(signs, raw, normalization, origin))
}

/// `log(max|w_k| / min|w_k|)`.
pub fn weight_ratio_log<T: Real>(ws: &WeightSet<T>) -> T {
    let lo = ws.raw.iter().copied().fold(T::infinity(), T::min);
    ws.raw_max - lo
}

fn check_len<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>) -> Result<()> {
    if nodes.nodes().len() != ws.len() {
        return Err(Error::Precondition(format!(
            "{} nodes but {} weights",
            nodes.nodes().len(),
            ws.len()
        )));
    }
    Ok(())
}

/// Second-form barycentric interpolant of `values` at `x`; returns
/// `values[k]` exactly at `x = x_k`.
pub fn interpolate<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>, values: &[T], x: T) -> Result<T> {
    check_len(nodes, ws)?;
    if values.len() != ws.len() {
        return Err(Error::Precondition(format!("{} values for {} nodes", values.len(), ws.len())));
    }
    if let Some(k) = nodes.position(x) {
        return Ok(values[k]);
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for ((&xk, &wk), &fk) in nodes.nodes().iter().zip(&ws.scaled).zip(values) {
        let c = wk / (x - xk);
        num = num + c * fk;
        den = den + c;
    }
    Ok(num / den)
}

/// `log|sum_k w_k / (x - x_k)|` for raw rational weights, from the closed form.
fn log_denominator<T: Real>(nodes: &NodeSet<T>, poles: &[Pole<T>], x: T) -> T {
    let z = num_complex::Complex::new(x, T::zero());
    let top: T = poles
        .iter()
        .map(|p| from_usize::<T>(p.multiplicity) * (z - p.at).norm().ln())
        .sum();
    let bottom: T = nodes.nodes().iter().map(|&xi| (x - xi).abs().ln()).sum();
    top - bottom
}

/// Signed Lagrange basis value `R_k(x)` (second form).
pub fn basis<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>, k: usize, x: T) -> Result<T> {
    check_len(nodes, ws)?;
    if k > ws.n() {
        return Err(Error::Precondition(format!("basis index {k} exceeds n = {}", ws.n())));
    }
    if let Some(i) = nodes.position(x) {
        return Ok(if i == k { T::one() } else { T::zero() });
    }
    let den: T = nodes
        .nodes()
        .iter()
        .zip(&ws.scaled)
        .map(|(&xj, &wj)| wj / (x - xj))
        .sum();
    Ok(ws.scaled[k] / (x - nodes.nodes()[k]) / den)
}

/// `|R_k(x)|`: 1 at `x_k`, 0 at the other nodes.
pub fn basis_abs<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>, k: usize, x: T) -> Result<T> {
    match &ws.origin {
        WeightOrigin::Rational(poles) => {
            check_len(nodes, ws)?;
            if k > ws.n() {
                return Err(Error::Precondition(format!("basis index {k} exceeds n = {}", ws.n())));
            }
            if let Some(i) = nodes.position(x) {
                return Ok(if i == k { T::one() } else { T::zero() });
            }
            let log = ws.raw[k] - (x - nodes.nodes()[k]).abs().ln() - log_denominator(nodes, poles, x);
            Ok(log.exp())
        }
        WeightOrigin::Opaque => basis(nodes, ws, k, x).map(T::abs),
    }
}

fn log_lebesgue_unchecked<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>, x: T) -> T {
    if nodes.position(x).is_some() {
        return T::zero();
    }
    match &ws.origin {
        WeightOrigin::Rational(poles) => {
            let terms: Vec<T> = nodes
                .nodes()
                .iter()
                .zip(&ws.raw)
                .map(|(&xk, &rk)| (rk - ws.raw_max) - (x - xk).abs().ln())
                .collect();
            log_sum_exp(&terms) + ws.raw_max - log_denominator(nodes, poles, x)
        }
        WeightOrigin::Opaque => {
            let mut num = T::zero();
            let mut den = T::zero();
            for (&xk, &wk) in nodes.nodes().iter().zip(&ws.scaled) {
                let c = wk / (x - xk);
                num = num + c.abs();
                den = den + c;
            }
            num.ln() - den.abs().ln()
        }
    }
}

/// `log Lambda_n(x)`; 0 at nodes.
pub fn log_lebesgue_function<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>, x: T) -> Result<T> {
    check_len(nodes, ws)?;
    Ok(log_lebesgue_unchecked(nodes, ws, x))
}

/// `Lambda_n(x) = sum_k |R_k(x)|`; 1 at nodes.
pub fn lebesgue_function<T: Real>(nodes: &NodeSet<T>, ws: &WeightSet<T>, x: T) -> Result<T> {
    log_lebesgue_function(nodes, ws, x).map(T::exp)
}

/// The maximum of the Lebesgue function over one gap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapMax<T> {
    pub lo: T,
    pub hi: T,
    pub x: T,
    pub lambda: T,
    pub log_lambda: T,
}

/// `Lambda_n = max over [-1, 1] of Lambda_n(x)`, with the maximiser of every gap.
#[derive(Clone, Debug, PartialEq)]
pub struct LebesgueReport<T> {
    pub n: usize,
    pub lambda: T,
    /// `log Lambda_n`; finite even when `lambda` overflows.
    pub log_lambda: T,
    pub argmax_x: T,
    pub per_gap_max: Vec<GapMax<T>>,
}

/// Default sample count per gap for [`lebesgue_constant`].
pub const SAMPLES_PER_GAP: usize = 20;

/// Scans every gap (including `[-1, x_0]` and `[x_n, 1]` when the nodes do
/// not reach the endpoints), then refines the best bracket of each gap by
/// golden-section search on `log Lambda_n` to width `1e-10`.
pub fn lebesgue_constant<T: Real>(
    nodes: &NodeSet<T>,
    ws: &WeightSet<T>,
    samples_per_gap: usize,
) -> Result<LebesgueReport<T>> {
    check_len(nodes, ws)?;
    if samples_per_gap < 10 {
        return Err(Error::Precondition(format!(
            "samples_per_gap must be at least 10, got {samples_per_gap}"
        )));
    }
    let xs = nodes.nodes();
    let one = T::one();
    let mut gaps = Vec::with_capacity(xs.len() + 1);
    if xs[0] > -one {
        gaps.push((-one, xs[0]));
    }
    gaps.extend(xs.windows(2).map(|w| (w[0], w[1])));
    if xs[xs.len() - 1] < one {
        gaps.push((xs[xs.len() - 1], one));
    }
    let width = lit::<T>(1e-10);
    let last = from_usize::<T>(samples_per_gap + 1);
    let per_gap_max: Vec<GapMax<T>> = gaps
        .par_iter()
        .map(|&(lo, hi)| {
            let grid: Vec<T> = (0..=samples_per_gap + 1)
                .map(|j| {
                    if j == samples_per_gap + 1 {
                        hi
                    } else {
                        lo + (hi - lo) * from_usize::<T>(j) / last
                    }
                })
                .collect();
            let f = |x: T| log_lebesgue_unchecked(nodes, ws, x);
            let (x, log_lambda) = scan_and_refine_max(&f, &grid, width);
            GapMax {
                lo,
                hi,
                x,
                lambda: log_lambda.exp(),
                log_lambda,
            }
        })
        .collect();
    let mut best = per_gap_max[0];
    for g in &per_gap_max[1..] {
        if g.log_lambda > best.log_lambda {
            best = *g;
        }
    }
    Ok(LebesgueReport {
        n: nodes.n(),
        lambda: best.lambda,
        log_lambda: best.log_lambda,
        argmax_x: best.x,
        per_gap_max,
    })
}
