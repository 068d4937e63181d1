//! Inter-potential points, the potential gaps `delta_n^-`, `delta_n^+`, and
//! numerical checks of the weight and Lebesgue-constant bounds, plus growth
//! and convergence measurements over sweeps of `n`.

use rayon::prelude::*;

use crate::barycentric::{
    interpolate, lebesgue_constant, log_lebesgue_function, weight_ratio_log, weights_from_nodes, LebesgueReport,
    Normalization, WeightSet,
};
use crate::density::{generate_nodes, spacing_profile, DensityKind, DensitySpec, NodeSet, SpacingFit};
use crate::error::{Error, Result};
use crate::optimize::find_increasing_root;
use crate::potential::{
    potential_extrema, BuiltinField, ContinuousPotential, DiscretePotential, ExternalField, PotentialExtrema,
    EXTREMA_GRID,
};
use crate::scalar::{from_usize, linear_fit, lit, Real};

/// How the nodes of a family are placed for each `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRule {
    /// `cdf(x_i) = i/n` for the family's density.
    Quantile,
    /// Roots of `T_{n+1}`; requires the Chebyshev density.
    ChebyshevFirstKind,
    /// `x_i = -1 + 2i/n`; requires the uniform density.
    Equidistant,
}

impl NodeRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::Quantile => "quantile",
            Self::ChebyshevFirstKind => "chebyshev_first_kind",
            Self::Equidistant => "equidistant",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "quantile" => Ok(Self::Quantile),
            "chebyshev_first_kind" => Ok(Self::ChebyshevFirstKind),
            "equidistant" => Ok(Self::Equidistant),
            other => Err(Error::Precondition(format!("unknown node rule '{other}'"))),
        }
    }
}

/// The external field of a family, as a function of `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldFamily<T> {
    None,
    /// `n` poles split between `±i/2`; the limit field is
    /// `log|x - i/2| / 2 + log|x + i/2| / 2`.
    HalfImaginaryPoles,
    /// `phi_n = u_bar - U_w` for the family's density, independent of `n`.
    Equilibrium { u_bar: T },
    /// A closed-form field, the same for every `n`.
    Functional(BuiltinField),
}

impl<T: Real> FieldFamily<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::HalfImaginaryPoles => "half_imaginary_poles",
            Self::Equilibrium { .. } => "equilibrium",
            Self::Functional(_) => "functional",
        }
    }
}

/// A sequence of interpolants indexed by `n`: a node density, a node rule
/// and a field family.
#[derive(Clone, Debug, PartialEq)]
pub struct Family<T> {
    density: DensitySpec<T>,
    rule: NodeRule,
    field: FieldFamily<T>,
}

impl<T: Real> Family<T> {
    pub fn new(density: DensitySpec<T>, rule: NodeRule, field: FieldFamily<T>) -> Result<Self> {
        match (rule, density.kind()) {
            (NodeRule::Equidistant, DensityKind::Uniform) | (NodeRule::ChebyshevFirstKind, DensityKind::Chebyshev) => {}
            (NodeRule::Quantile, _) => {}
            (r, k) => {
                return Err(Error::Precondition(format!(
                    "node rule {} does not match the {} density",
                    r.name(),
                    k.name()
                )))
            }
        }
        Ok(Self { density, rule, field })
    }

    /// Equidistant polynomial interpolation.
    pub fn equidistant_polynomial() -> Self {
        Self::new(DensitySpec::uniform(), NodeRule::Equidistant, FieldFamily::None).expect("valid family")
    }

    /// Chebyshev (Lobatto) nodes with `n` poles at `±i/2`.
    pub fn chebyshev_poles() -> Self {
        Self::new(DensitySpec::chebyshev(), NodeRule::Quantile, FieldFamily::HalfImaginaryPoles).expect("valid family")
    }

    /// Equidistant nodes with `n` poles at `±i/2`.
    pub fn equidistant_poles() -> Self {
        Self::new(DensitySpec::uniform(), NodeRule::Equidistant, FieldFamily::HalfImaginaryPoles)
            .expect("valid family")
    }

    /// Polynomial interpolation at the quantiles of the truncated Gaussian.
    pub fn gaussian_polynomial() -> Self {
        Self::new(gaussian(), NodeRule::Quantile, FieldFamily::None).expect("valid family")
    }

    /// Gaussian quantile nodes with `n` poles at `±i/2`.
    pub fn gaussian_poles() -> Self {
        Self::new(gaussian(), NodeRule::Quantile, FieldFamily::HalfImaginaryPoles).expect("valid family")
    }

    /// Gaussian quantile nodes with the equilibrium field `1 - U_w`.
    pub fn gaussian_equilibrium() -> Self {
        Self::new(gaussian(), NodeRule::Quantile, FieldFamily::Equilibrium { u_bar: T::one() }).expect("valid family")
    }

    pub fn density(&self) -> &DensitySpec<T> {
        &self.density
    }

    pub fn rule(&self) -> NodeRule {
        self.rule
    }

    pub fn field_family(&self) -> FieldFamily<T> {
        self.field
    }

    /// `"<density>/<rule>/<field>"`.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.density.name(), self.rule.name(), self.field.name())
    }

    pub fn nodes(&self, n: usize) -> Result<NodeSet<T>> {
        match self.rule {
            NodeRule::Quantile => generate_nodes(&self.density, n),
            NodeRule::ChebyshevFirstKind => NodeSet::chebyshev_first_kind(n),
            NodeRule::Equidistant => NodeSet::equidistant(n),
        }
    }

    /// `phi_n` for degree `n`.
    pub fn discrete_field(&self, n: usize) -> ExternalField<T> {
        match self.field {
            FieldFamily::None => ExternalField::None,
            FieldFamily::HalfImaginaryPoles => ExternalField::half_imaginary_poles(n),
            FieldFamily::Equilibrium { u_bar } => ExternalField::equilibrium(self.density.clone(), u_bar),
            FieldFamily::Functional(f) => ExternalField::Functional(f),
        }
    }

    /// The limit field `phi`.
    pub fn limit_field(&self) -> ExternalField<T> {
        match self.field {
            FieldFamily::None => ExternalField::None,
            FieldFamily::HalfImaginaryPoles => ExternalField::Functional(BuiltinField::HalfImaginaryPair),
            FieldFamily::Equilibrium { u_bar } => ExternalField::equilibrium(self.density.clone(), u_bar),
            FieldFamily::Functional(f) => ExternalField::Functional(f),
        }
    }

    pub fn continuous(&self) -> Result<ContinuousPotential<T>> {
        ContinuousPotential::new(self.density.clone(), self.limit_field())
    }

    /// The discrete potential and weights at degree `n`.
    pub fn instance(&self, n: usize, normalization: Normalization) -> Result<Instance<T>> {
        let nodes = self.nodes(n)?;
        let field = self.discrete_field(n);
        let weights = weights_from_nodes(&nodes, &field, normalization)?;
        let potential = DiscretePotential::new(nodes, field)?;
        Ok(Instance { potential, weights })
    }

    /// Power-law spacing envelope fitted over `ns`. When fewer than three
    /// distinct degrees are given, `{20, 40, 80}` are added.
    pub fn spacing_fit(&self, ns: &[usize]) -> Result<SpacingFit<T>> {
        let mut all: Vec<usize> = ns.to_vec();
        all.sort_unstable();
        all.dedup();
        if all.len() < 3 {
            all.extend([20, 40, 80]);
            all.sort_unstable();
            all.dedup();
        }
        let sets = all.iter().map(|&n| self.nodes(n)).collect::<Result<Vec<_>>>()?;
        spacing_profile(&sets)?
            .fit
            .ok_or_else(|| Error::Precondition("spacing fit needs three distinct n".into()))
    }
}

fn gaussian<T: Real>() -> DensitySpec<T> {
    DensitySpec::truncated_gaussian(T::one()).expect("unit scale is valid")
}

/// One member of a [`Family`].
#[derive(Clone, Debug)]
pub struct Instance<T> {
    pub potential: DiscretePotential<T>,
    pub weights: WeightSet<T>,
}

impl<T: Real> Instance<T> {
    pub fn n(&self) -> usize {
        self.potential.n()
    }

    pub fn nodes(&self) -> &NodeSet<T> {
        self.potential.nodes()
    }
}

/// The stationary points `zeta_i` of `U_n`, one per gap.
#[derive(Clone, Debug, PartialEq)]
pub struct InterPotentialSet<T> {
    pub zetas: Vec<T>,
    /// `|U_n'(zeta_i)|`, evaluated relative to the left node of the gap.
    pub residuals: Vec<T>,
}

/// Largest accepted `|U_n'(zeta_i)|`.
pub const ZETA_RESIDUAL: f64 = 1e-10;

/// `U_n` derivatives at `x_a + t`. Node distances are formed as
/// `(x_a - x_j) + t` so that the two nearest terms keep full relative
/// precision in `t` even when the gap is tiny.
fn local_deriv<T: Real>(un: &DiscretePotential<T>, a: usize, t: T, order: u8) -> T {
    let xs = un.nodes().nodes();
    let xa = xs[a];
    let n = un.n();
    let s: T = xs
        .iter()
        .map(|&xj| {
            let d = (xa - xj) + t;
            if order == 1 {
                -T::one() / d
            } else {
                T::one() / (d * d)
            }
        })
        .sum();
    s / from_usize::<T>(n + 1) + un.field().deriv(xa + t, n, order)
}

/// One root of `U_n'` per gap, by Newton steps safeguarded by bisection on
/// `(x_{i-1} + eps_g, x_i - eps_g)`, `eps_g = 1e-13 gap`. Convexity is
/// spot-checked at three points per gap first; a failed check or a missing
/// sign change is reported, not repaired.
pub fn inter_potential_points<T: Real>(un: &DiscretePotential<T>) -> Result<InterPotentialSet<T>> {
    let xs = un.nodes().nodes();
    let found: Vec<Result<(T, T)>> = (1..xs.len())
        .into_par_iter()
        .map(|i| {
            let a = i - 1;
            let gap = xs[i] - xs[a];
            let eps = lit::<T>(1e-13) * gap;
            let (lo, hi) = (eps, gap - eps);
            let f = |t: T| local_deriv(un, a, t, 1);
            let df = |t: T| local_deriv(un, a, t, 2);
            let min_second = [0.25, 0.5, 0.75]
                .iter()
                .map(|&q| df(gap * lit(q)))
                .fold(T::infinity(), T::min);
            let (fl, fh) = (f(lo), f(hi));
            if !(min_second > T::zero()) || !(fl < T::zero()) || !(fh > T::zero()) {
                let sign = |v: T| if v > T::zero() { 1 } else if v < T::zero() { -1 } else { 0 };
                return Err(Error::Convexity {
                    gap: i,
                    left: xs[a].to_f64().unwrap_or(f64::NAN),
                    right: xs[i].to_f64().unwrap_or(f64::NAN),
                    sign_left: sign(fl),
                    sign_right: sign(fh),
                    min_second: min_second.to_f64().unwrap_or(f64::NAN),
                });
            }
            let root = find_increasing_root(&f, &df, lo, hi, lit(1e-13));
            if !(root.residual <= lit(ZETA_RESIDUAL)) {
                return Err(Error::Residual {
                    gap: i,
                    residual: root.residual.to_f64().unwrap_or(f64::NAN),
                });
            }
            // keep zeta strictly inside after rounding back to absolute position
            let z = (xs[a] + root.x).max(xs[a] + eps).min(xs[i] - eps);
            let z = if z <= xs[a] || z >= xs[i] { xs[a] + gap / lit(2.0) } else { z };
            Ok((z, root.residual))
        })
        .collect();
    let mut zetas = Vec::with_capacity(found.len());
    let mut residuals = Vec::with_capacity(found.len());
    for r in found {
        let (z, res) = r?;
        zetas.push(z);
        residuals.push(res);
    }
    Ok(InterPotentialSet { zetas, residuals })
}

/// One-sided maxima of `U_n - U` over the inter-potential points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaBounds<T> {
    pub delta_minus: T,
    pub delta_plus: T,
}

impl<T: Real> DeltaBounds<T> {
    pub fn sum(&self) -> T {
        self.delta_minus + self.delta_plus
    }
}

/// `delta_plus = max(0, max_i U_n(zeta_i) - U(zeta_i))`,
/// `delta_minus = max(0, max_i U(zeta_i) - U_n(zeta_i))`.
pub fn measure_delta<T: Real>(
    un: &DiscretePotential<T>,
    u: &ContinuousPotential<T>,
    zetas: &InterPotentialSet<T>,
) -> DeltaBounds<T> {
    let diffs: Vec<T> = zetas.zetas.par_iter().map(|&z| un.eval(z) - u.value(z)).collect();
    let mut out = DeltaBounds {
        delta_minus: T::zero(),
        delta_plus: T::zero(),
    };
    for d in diffs {
        out.delta_plus = out.delta_plus.max(d);
        out.delta_minus = out.delta_minus.max(-d);
    }
    out
}

/// Indices `i` (1-based, as for `zeta_i`) whose inter-potential point lies
/// outside `(x_{i-1} + a1 n^(-b1-1), x_i - a1 n^(-b1-1))`.
pub fn margin_violations<T: Real>(nodes: &NodeSet<T>, zetas: &InterPotentialSet<T>, a1: T, b1: T) -> Vec<usize> {
    let n = nodes.n();
    let m = a1 * from_usize::<T>(n).powf(-b1 - T::one());
    let xs = nodes.nodes();
    zetas
        .zetas
        .iter()
        .enumerate()
        .filter(|&(j, &z)| !(z > xs[j] + m && z < xs[j + 1] - m))
        .map(|(j, _)| j + 1)
        .collect()
}

/// Per-weight check of `log|w_i|` (with `C = 1`) against the bounds
/// `log(a1 / (e n^(b1+1))) + (n+1)(U(zeta_k) - delta^-)` and
/// `log(a2 / n^b2) + (n+1)(U(zeta_k) + delta^+)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightBoundCheck<T> {
    /// 1-based index `k_i` of the inter-potential point used for weight `i`.
    pub k: Vec<usize>,
    pub log_abs: Vec<T>,
    pub lower_log: Vec<T>,
    pub upper_log: Vec<T>,
    pub lower_ok: Vec<bool>,
    pub upper_ok: Vec<bool>,
    /// Both bounds for the last weight using `zeta_{n-1}` instead of `zeta_n`.
    pub last_alt_ok: Option<(bool, bool)>,
}

impl<T> WeightBoundCheck<T> {
    pub fn all_ok(&self) -> bool {
        self.lower_ok.iter().chain(&self.upper_ok).all(|&b| b)
    }
}

pub fn check_weight_bounds<T: Real>(
    un: &DiscretePotential<T>,
    u: &ContinuousPotential<T>,
    ws: &WeightSet<T>,
    zetas: &InterPotentialSet<T>,
    delta: &DeltaBounds<T>,
    fit: &SpacingFit<T>,
) -> Result<WeightBoundCheck<T>> {
    let n = un.n();
    if ws.n() != n || zetas.zetas.len() != n {
        return Err(Error::Precondition("weights, nodes and inter-potential points disagree on n".into()));
    }
    let xs = un.nodes().nodes();
    let np1 = from_usize::<T>(n + 1);
    let logn = from_usize::<T>(n).ln();
    let z = &zetas.zetas;
    let u_i = |i: usize, zeta: T| un.eval(zeta) + (zeta - xs[i]).abs().ln() / np1;
    let lower_const = fit.a1.ln() - T::one() - (fit.b1 + T::one()) * logn;
    let upper_const = fit.a2.ln() - fit.b2 * logn;
    let bounds = |k: usize| {
        let uz = u.value(z[k - 1]);
        (
            lower_const + np1 * (uz - delta.delta_minus),
            upper_const + np1 * (uz + delta.delta_plus),
        )
    };
    let raw = ws.raw_log_abs();
    let mut out = WeightBoundCheck {
        k: Vec::with_capacity(n + 1),
        log_abs: raw.to_vec(),
        lower_log: Vec::with_capacity(n + 1),
        upper_log: Vec::with_capacity(n + 1),
        lower_ok: Vec::with_capacity(n + 1),
        upper_ok: Vec::with_capacity(n + 1),
        last_alt_ok: None,
    };
    for i in 0..=n {
        let k = if i == 0 {
            1
        } else if i == n {
            n
        } else if u_i(i, z[i - 1]) >= u_i(i, z[i]) {
            i
        } else {
            i + 1
        };
        let (lo, hi) = bounds(k);
        out.k.push(k);
        out.lower_log.push(lo);
        out.upper_log.push(hi);
        out.lower_ok.push(lo < raw[i]);
        out.upper_ok.push(raw[i] < hi);
    }
    if n >= 2 {
        let (lo, hi) = bounds(n - 1);
        out.last_alt_ok = Some((lo < raw[n], raw[n] < hi));
    }
    Ok(out)
}

/// Outcome of the equilibrium-regime upper bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpperCheck<T> {
    /// `d > 0.01`: the potential is not constant and the bound does not apply.
    NotApplicable,
    Checked {
        /// `(n+1)(delta^- + delta^+) + 1 + log(5 + 2 b1 log a1 + 2 b1 log n)`
        bound_log: T,
        /// As `bound_log` with the exponent doubled, `2(n+1)(delta^- + delta^+) + 1`.
        bound_log_doubled: T,
        ok: bool,
        ok_doubled: bool,
    },
}

impl<T> UpperCheck<T> {
    pub fn ok(&self) -> Option<bool> {
        match self {
            Self::NotApplicable => None,
            Self::Checked { ok, .. } => Some(*ok),
        }
    }
}

/// Largest potential oscillation `d` for which the upper bound is checked.
pub const EQUILIBRIUM_GATE: f64 = 0.01;

/// Every measured quantity and bound for one `n`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsReport<T> {
    pub n: usize,
    pub extrema: PotentialExtrema<T>,
    pub rho: T,
    pub delta: DeltaBounds<T>,
    pub spacing: SpacingFit<T>,
    pub zetas: InterPotentialSet<T>,
    pub weight_ratio_log: T,
    pub ratio_lower_log: T,
    pub ratio_upper_log: T,
    pub lebesgue: LebesgueReport<T>,
    pub lebesgue_lower_log: T,
    pub weights: WeightBoundCheck<T>,
    pub upper: UpperCheck<T>,
    /// Indices whose inter-potential point misses the spacing margin.
    pub margin_violations: Vec<usize>,
}

impl<T: Real> BoundsReport<T> {
    pub fn ok_weights(&self) -> bool {
        self.weights.all_ok()
    }

    pub fn ok_ratio(&self) -> bool {
        let (a, b) = check_ratio_bounds(self);
        a && b
    }

    pub fn ok_lower(&self) -> bool {
        check_lebesgue_lower(self)
    }

    /// Statement-constant upper bound, when applicable.
    pub fn ok_upper(&self) -> Option<bool> {
        self.upper.ok()
    }

    /// `Lambda_n`'s upper bound value, when applicable (may overflow).
    pub fn lebesgue_upper(&self) -> Option<T> {
        match self.upper {
            UpperCheck::Checked { bound_log, .. } => Some(bound_log.exp()),
            UpperCheck::NotApplicable => None,
        }
    }
}

/// Runs every check for the family member of degree `n`.
pub fn bounds_report<T: Real>(
    family: &Family<T>,
    n: usize,
    fit: &SpacingFit<T>,
    u: &ContinuousPotential<T>,
    extrema: &PotentialExtrema<T>,
    samples_per_gap: usize,
) -> Result<BoundsReport<T>> {
    let inst = family.instance(n, Normalization::Raw)?;
    let un = &inst.potential;
    let zetas = inter_potential_points(un)?;
    let delta = measure_delta(un, u, &zetas);
    let weights = check_weight_bounds(un, u, &inst.weights, &zetas, &delta, fit)?;
    let lebesgue = lebesgue_constant(inst.nodes(), &inst.weights, samples_per_gap)?;
    let np1 = from_usize::<T>(n + 1);
    let logn = from_usize::<T>(n).ln();
    let e1 = T::one();
    let ds = np1 * delta.sum();
    let dn = np1 * extrema.d;
    let alg = fit.a1.ln() + (fit.b2 - fit.b1 - T::one()) * logn - fit.a2.ln();
    let ratio_lower_log = alg - e1 - ds + dn;
    let ratio_upper_log = e1 - alg + ds + dn;
    let lebesgue_lower_log = fit.a1.ln() - ds - lit::<T>(2.0).ln() - e1 - (fit.b1 + T::one()) * logn + dn;
    let upper = if extrema.d <= lit(EQUILIBRIUM_GATE) {
        let poly = lit::<T>(5.0) + lit::<T>(2.0) * fit.b1 * fit.a1.ln() + lit::<T>(2.0) * fit.b1 * logn;
        let bound_log = ds + e1 + poly.ln();
        let bound_log_doubled = ds + ds + e1 + poly.ln();
        UpperCheck::Checked {
            bound_log,
            bound_log_doubled,
            ok: lebesgue.log_lambda <= bound_log,
            ok_doubled: lebesgue.log_lambda <= bound_log_doubled,
        }
    } else {
        UpperCheck::NotApplicable
    };
    let margin_violations = margin_violations(inst.nodes(), &zetas, fit.a1, fit.b1);
    Ok(BoundsReport {
        n,
        extrema: *extrema,
        rho: extrema.rho(),
        delta,
        spacing: *fit,
        zetas,
        weight_ratio_log: weight_ratio_log(&inst.weights),
        ratio_lower_log,
        ratio_upper_log,
        lebesgue,
        lebesgue_lower_log,
        weights,
        upper,
        margin_violations,
    })
}

/// `(lower <= ratio, ratio <= upper)` in the log domain.
pub fn check_ratio_bounds<T: Real>(r: &BoundsReport<T>) -> (bool, bool) {
    (
        r.ratio_lower_log <= r.weight_ratio_log,
        r.weight_ratio_log <= r.ratio_upper_log,
    )
}

/// `log Lambda_n >= log` of the lower bound.
pub fn check_lebesgue_lower<T: Real>(r: &BoundsReport<T>) -> bool {
    r.lebesgue.log_lambda >= r.lebesgue_lower_log
}

/// The upper bound check; [`UpperCheck::NotApplicable`] unless `d <= 0.01`.
pub fn check_lebesgue_upper<T: Real>(r: &BoundsReport<T>) -> UpperCheck<T> {
    r.upper
}

/// A family swept over several `n` with a shared spacing envelope.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep<T> {
    pub label: String,
    pub fit: SpacingFit<T>,
    pub extrema: PotentialExtrema<T>,
    pub rows: Vec<BoundsReport<T>>,
}

/// Header of the sweep CSV.
pub const SWEEP_CSV_HEADER: &str =
    "n,lambda,log_lambda,weight_ratio_log,delta_minus,delta_plus,d,rho,lb_thm41_log,ub_thm53,ok_thm34,ok_cor,ok_thm41,ok_thm53";

fn num<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN))
}

impl<T: Real> BoundsReport<T> {
    /// One sweep CSV record; `NA` marks a non-applicable upper bound.
    pub fn csv_row(&self) -> String {
        let ub = self.lebesgue_upper().map(num).unwrap_or_else(|| "NA".into());
        let ok53 = self.ok_upper().map(|b| b.to_string()).unwrap_or_else(|| "NA".into());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            num(self.lebesgue.lambda),
            num(self.lebesgue.log_lambda),
            num(self.weight_ratio_log),
            num(self.delta.delta_minus),
            num(self.delta.delta_plus),
            num(self.extrema.d),
            num(self.rho),
            num(self.lebesgue_lower_log),
            ub,
            self.ok_weights(),
            self.ok_ratio(),
            self.ok_lower(),
            ok53
        )
    }
}

impl<T: Real> Sweep<T> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Bounds reports for every `n` in `ns` (in the given order).
pub fn sweep<T: Real>(family: &Family<T>, ns: &[usize], samples_per_gap: usize) -> Result<Sweep<T>> {
    if ns.is_empty() {
        return Err(Error::Precondition("sweep needs at least one n".into()));
    }
    let fit = family.spacing_fit(ns)?;
    let u = family.continuous()?;
    let extrema = potential_extrema(&u, EXTREMA_GRID)?;
    let rows = ns
        .par_iter()
        .map(|&n| bounds_report(family, n, &fit, &u, &extrema, samples_per_gap))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep {
        label: family.label(),
        fit,
        extrema,
        rows,
    })
}

/// Least-squares line through `(n, log value)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthFit<T> {
    pub ns: Vec<usize>,
    pub log_values: Vec<T>,
    /// Points actually fitted (the smallest `n` is dropped when four or more
    /// points are given).
    pub fitted_from: usize,
    pub slope: T,
    pub intercept: T,
}

/// Fits `log_values ~ slope n + intercept`, dropping the smallest `n` when
/// at least four points are given. Needs three points.
pub fn growth_slope<T: Real>(ns: &[usize], log_values: &[T]) -> Result<GrowthFit<T>> {
    if ns.len() != log_values.len() || ns.len() < 3 {
        return Err(Error::Precondition(format!("growth fit needs at least 3 points, got {}", ns.len())));
    }
    let mut pts: Vec<(usize, T)> = ns.iter().copied().zip(log_values.iter().copied()).collect();
    pts.sort_by_key(|p| p.0);
    let skip = usize::from(pts.len() >= 4);
    let xs: Vec<T> = pts[skip..].iter().map(|p| from_usize::<T>(p.0)).collect();
    let ys: Vec<T> = pts[skip..].iter().map(|p| p.1).collect();
    let (slope, intercept) =
        linear_fit(&xs, &ys).ok_or_else(|| Error::Precondition("growth fit needs distinct n".into()))?;
    Ok(GrowthFit {
        ns: pts.iter().map(|p| p.0).collect(),
        log_values: pts.iter().map(|p| p.1).collect(),
        fitted_from: pts[skip].0,
        slope,
        intercept,
    })
}

/// Evaluation point actually used at `x_hat` for one node set: `x_hat`
/// itself, or `x_hat` moved by half the adjacent gap if it is a node.
pub fn off_node<T: Real>(nodes: &NodeSet<T>, x_hat: T) -> T {
    let xs = nodes.nodes();
    match nodes.position(x_hat) {
        None => x_hat,
        Some(k) if k + 1 < xs.len() => x_hat + (xs[k + 1] - xs[k]) / lit(2.0),
        Some(k) => x_hat - (xs[k] - xs[k - 1]) / lit(2.0),
    }
}

/// Slope in `n` of `log Lambda_n(x_hat)` over a sweep.
pub fn pointwise_growth_rate<T: Real>(sweep: &[(NodeSet<T>, WeightSet<T>)], x_hat: T) -> Result<GrowthFit<T>> {
    let mut ns = Vec::with_capacity(sweep.len());
    let mut logs = Vec::with_capacity(sweep.len());
    for (nodes, ws) in sweep {
        ns.push(nodes.n());
        logs.push(log_lebesgue_function(nodes, ws, off_node(nodes, x_hat))?);
    }
    growth_slope(&ns, &logs)
}

/// Number of nodes where `U(x) > max U - c`.
pub fn count_high_potential_nodes<T: Real>(nodes: &NodeSet<T>, u: &ContinuousPotential<T>, c: T) -> Result<usize> {
    if !(c > T::zero()) {
        return Err(Error::Precondition(format!("c must be positive, got {c}")));
    }
    let e = potential_extrema(u, EXTREMA_GRID)?;
    Ok(nodes.nodes().iter().filter(|&&x| u.value(x) > e.u_max - c).count())
}

/// `max |U_n - U|` over the gap midpoints.
pub fn mid_gap_potential_gap<T: Real>(un: &DiscretePotential<T>, u: &ContinuousPotential<T>) -> T {
    un.nodes()
        .nodes()
        .windows(2)
        .map(|w| {
            let m = (w[0] + w[1]) / lit(2.0);
            (un.eval(m) - u.value(m)).abs()
        })
        .fold(T::zero(), T::max)
}

/// Test functions for the convergence experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestFunction {
    /// `1 / (1 + 25 x^2)`, poles at `±i/5`.
    Runge,
    Exp,
    /// `|x|`, not analytic.
    Abs,
}

impl TestFunction {
    pub fn name(self) -> &'static str {
        match self {
            Self::Runge => "runge",
            Self::Exp => "exp",
            Self::Abs => "abs",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "runge" => Ok(Self::Runge),
            "exp" => Ok(Self::Exp),
            "abs" => Ok(Self::Abs),
            other => Err(Error::Precondition(format!("unknown test function '{other}'"))),
        }
    }

    pub fn eval<T: Real>(self, x: T) -> T {
        match self {
            Self::Runge => T::one() / (T::one() + lit::<T>(25.0) * x * x),
            Self::Exp => x.exp(),
            Self::Abs => x.abs(),
        }
    }
}

/// Sup-norm interpolation error at one `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow<T> {
    pub n: usize,
    pub sup_error: T,
}

/// Sup-norm error of interpolating `f` on a uniform grid of `grid` points
/// (nodes excluded), for every member of the sweep.
pub fn convergence_experiment<T: Real>(
    sweep: &[(NodeSet<T>, WeightSet<T>)],
    f: TestFunction,
    grid: usize,
) -> Result<Vec<ConvergenceRow<T>>> {
    if grid < 2 {
        return Err(Error::Precondition(format!("grid needs at least 2 points, got {grid}")));
    }
    let last = from_usize::<T>(grid - 1);
    sweep
        .par_iter()
        .map(|(nodes, ws)| {
            let values: Vec<T> = nodes.nodes().iter().map(|&x| f.eval(x)).collect();
            let mut err = T::zero();
            for i in 0..grid {
                let x = -T::one() + lit::<T>(2.0) * from_usize::<T>(i) / last;
                if nodes.position(x).is_some() {
                    continue;
                }
                let e = (interpolate(nodes, ws, &values, x)? - f.eval(x)).abs();
                err = err.max(e);
            }
            Ok(ConvergenceRow {
                n: nodes.n(),
                sup_error: err,
            })
        })
        .collect()
}

/// Geometric decay factor per unit `n`, `exp(slope)` of `log error` vs
/// `n`, over the rows whose error is above `floor`.
pub fn decay_rate<T: Real>(rows: &[ConvergenceRow<T>], floor: T) -> Result<T> {
    let kept: Vec<&ConvergenceRow<T>> = rows.iter().filter(|r| r.sup_error > floor).collect();
    if kept.len() < 2 {
        return Err(Error::Precondition("decay rate needs two errors above the floor".into()));
    }
    let xs: Vec<T> = kept.iter().map(|r| from_usize::<T>(r.n)).collect();
    let ys: Vec<T> = kept.iter().map(|r| r.sup_error.ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys).ok_or_else(|| Error::Precondition("decay rate needs distinct n".into()))?;
    Ok(slope.exp())
}

/// Weights and nodes of a family over a list of degrees.
pub fn family_sweep<T: Real>(
    family: &Family<T>,
    ns: &[usize],
    normalization: Normalization,
) -> Result<Vec<(NodeSet<T>, WeightSet<T>)>> {
    ns.par_iter()
        .map(|&n| {
            let inst = family.instance(n, normalization)?;
            Ok((inst.potential.nodes().clone(), inst.weights))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn explicit(v: &[f64]) -> DiscretePotential<f64> {
        DiscretePotential::new(NodeSet::explicit(v.to_vec()).unwrap(), ExternalField::None).unwrap()
    }

    #[test]
    fn inter_potential_examples() {
        let z = inter_potential_points(&explicit(&[-1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(z.zetas[0], 0.0, epsilon = 1e-15);
        let z = inter_potential_points(&explicit(&[-1.0, 0.0, 1.0])).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(z.zetas[0], -r, epsilon = 1e-10);
        assert_abs_diff_eq!(z.zetas[1], r, epsilon = 1e-10);
        assert!(z.residuals.iter().all(|&v| v <= 1e-10));

        let un = DiscretePotential::new(NodeSet::equidistant(20).unwrap(), ExternalField::None).unwrap();
        let z = inter_potential_points(&un).unwrap();
        assert!(margin_violations(un.nodes(), &z, 2.0, 1.0).is_empty());
    }

    #[test]
    fn concave_field_is_reported() {
        // a strongly concave field makes U_n non-convex somewhere
        let poles = ExternalField::poles(vec![Pole::new(0.0, 0.01, 3), Pole::new(0.0, -0.01, 3)]).unwrap();
        let un = DiscretePotential::new(NodeSet::equidistant(6).unwrap(), poles).unwrap();
        assert!(matches!(inter_potential_points(&un), Err(Error::Convexity { .. })));
    }

    use crate::potential::Pole;

    #[test]
    fn tiny_gaps_keep_small_residuals() {
        let un = DiscretePotential::new(NodeSet::<f64>::chebyshev_first_kind(320).unwrap(), ExternalField::None).unwrap();
        let z = inter_potential_points(&un).unwrap();
        let xs = un.nodes().nodes();
        for (i, &zeta) in z.zetas.iter().enumerate() {
            assert!(xs[i] < zeta && zeta < xs[i + 1]);
        }
        assert!(z.residuals.iter().all(|&v| v <= 1e-10));
    }

    #[test]
    fn delta_examples() {
        let un = explicit(&[-1.0, 1.0]);
        let u = ContinuousPotential::new(DensitySpec::uniform(), ExternalField::None).unwrap();
        let z = inter_potential_points(&un).unwrap();
        let d = measure_delta(&un, &u, &z);
        assert_abs_diff_eq!(d.delta_minus, 1.0, epsilon = 1e-15);
        assert_eq!(d.delta_plus, 0.0);

        let n = 15;
        let un = DiscretePotential::new(NodeSet::<f64>::chebyshev_first_kind(n).unwrap(), ExternalField::None).unwrap();
        let u = ContinuousPotential::new(DensitySpec::chebyshev(), ExternalField::None).unwrap();
        let z = inter_potential_points(&un).unwrap();
        let d = measure_delta(&un, &u, &z);
        assert_abs_diff_eq!(d.delta_minus, 2f64.ln() / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.delta_plus, 0.0, epsilon = 1e-12);
        for &zeta in &z.zetas {
            let diff = un.eval(zeta) - u.eval(zeta).unwrap();
            assert!(-d.delta_minus <= diff && diff <= d.delta_plus);
        }
    }

    #[test]
    fn equilibrium_delta_shrinks() {
        let fam = Family::<f64>::gaussian_equilibrium();
        let u = fam.continuous().unwrap();
        let sums: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&n| {
                let inst = fam.instance(n, Normalization::MaxOne).unwrap();
                let z = inter_potential_points(&inst.potential).unwrap();
                measure_delta(&inst.potential, &u, &z).sum()
            })
            .collect();
        assert!(sums[0] > sums[1] && sums[1] > sums[2], "{sums:?}");
    }

    #[test]
    fn weight_bound_examples() {
        for fam in [
            Family::<f64>::equidistant_polynomial(),
            Family::new(DensitySpec::chebyshev(), NodeRule::Quantile, FieldFamily::None).unwrap(),
            Family::gaussian_equilibrium(),
        ] {
            let fit = fam.spacing_fit(&[20, 40, 80]).unwrap();
            let u = fam.continuous().unwrap();
            let inst = fam.instance(40, Normalization::Raw).unwrap();
            let z = inter_potential_points(&inst.potential).unwrap();
            let d = measure_delta(&inst.potential, &u, &z);
            let c = check_weight_bounds(&inst.potential, &u, &inst.weights, &z, &d, &fit).unwrap();
            assert_eq!(c.lower_ok.len(), 41);
            assert!(c.all_ok(), "{}", fam.label());
        }
    }

    #[test]
    fn bound_suite_small_sweeps() {
        let ch = Family::new(DensitySpec::<f64>::chebyshev(), NodeRule::Quantile, FieldFamily::None).unwrap();
        let s = sweep(&ch, &[20, 40, 80], 20).unwrap();
        for r in &s.rows {
            assert!(r.ok_weights() && r.ok_ratio() && r.ok_lower());
            assert_eq!(r.ok_upper(), Some(true));
        }
        let g = sweep(&Family::<f64>::gaussian_polynomial(), &[20, 40, 80], 20).unwrap();
        assert!(g.rows.iter().all(|r| r.ok_weights() && r.ok_ratio() && r.ok_lower()));
        assert!(g.rows.iter().all(|r| r.ok_upper().is_none()));
        let csv = g.to_csv();
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().ends_with(",true,true,true,NA"));
    }

    #[test]
    fn growth_fit_rules() {
        assert!(growth_slope::<f64>(&[10, 20], &[1.0, 2.0]).is_err());
        let f = growth_slope(&[10, 20, 30], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 0.1, epsilon = 1e-14);
        assert_eq!(f.fitted_from, 10);
        let f = growth_slope(&[40, 10, 20, 30], &[4.0, 9.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(f.slope, 0.1, epsilon = 1e-14);
        assert_eq!(f.fitted_from, 20);
    }

    #[test]
    fn chebyshev_pointwise_growth_is_flat() {
        let ch = Family::new(DensitySpec::<f64>::chebyshev(), NodeRule::Quantile, FieldFamily::None).unwrap();
        let sw = family_sweep(&ch, &[20, 40, 60, 80, 100], Normalization::MaxOne).unwrap();
        for x in [0.0, 0.3, 0.77] {
            let g = pointwise_growth_rate(&sw, x).unwrap();
            assert!(g.slope.abs() <= 0.01, "{x}: {}", g.slope);
        }
    }

    #[test]
    fn off_node_moves_by_half_gap() {
        let ns = NodeSet::equidistant(4).unwrap();
        assert_eq!(off_node(&ns, 0.0), 0.25);
        assert_eq!(off_node(&ns, 1.0), 0.75);
        assert_eq!(off_node(&ns, 0.1), 0.1);
    }

    #[test]
    fn high_potential_counts() {
        let u = ContinuousPotential::new(DensitySpec::<f64>::chebyshev(), ExternalField::None).unwrap();
        let ns = NodeSet::chebyshev_first_kind(12).unwrap();
        assert_eq!(count_high_potential_nodes(&ns, &u, 0.1).unwrap(), 13);
        let ua = ContinuousPotential::new(DensitySpec::<f64>::uniform(), ExternalField::None).unwrap();
        let eq = NodeSet::equidistant(12).unwrap();
        assert_eq!(count_high_potential_nodes(&eq, &ua, 1.0).unwrap(), 13);
        assert!(count_high_potential_nodes(&eq, &ua, 0.0).is_err());
    }

    #[test]
    fn high_potential_fraction_matches_mass() {
        let fam = Family::<f64>::gaussian_polynomial();
        let u = fam.continuous().unwrap();
        let e = potential_extrema(&u, EXTREMA_GRID).unwrap();
        let c = e.d / 2.0;
        let nodes = fam.nodes(160).unwrap();
        let frac = count_high_potential_nodes(&nodes, &u, c).unwrap() as f64 / 161.0;
        // oracle: trapezoid mass of w over {U > max U - c} on a fine grid
        let w = fam.density();
        let m = 20_000;
        let mut mass = 0.0;
        for i in 0..m {
            let (a, b) = (-1.0 + 2.0 * i as f64 / m as f64, -1.0 + 2.0 * (i + 1) as f64 / m as f64);
            let mid = 0.5 * (a + b);
            if u.eval(mid).unwrap() > e.u_max - c {
                mass += 0.5 * (w.eval(a).unwrap() + w.eval(b).unwrap()) * (b - a);
            }
        }
        assert!((frac - mass).abs() <= 0.05, "{frac} vs {mass}");
    }

    #[test]
    fn weak_convergence_along_n() {
        for density in [DensitySpec::<f64>::uniform(), DensitySpec::chebyshev(), DensitySpec::truncated_gaussian(1.0).unwrap()] {
            let u = ContinuousPotential::new(density.clone(), ExternalField::None).unwrap();
            let gaps: Vec<f64> = [20, 40, 80, 160]
                .iter()
                .map(|&n| {
                    let un = DiscretePotential::new(generate_nodes(&density, n).unwrap(), ExternalField::None).unwrap();
                    mid_gap_potential_gap(&un, &u)
                })
                .collect();
            assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{}: {gaps:?}", density.name());
        }
    }

    #[test]
    fn convexity_at_mid_gaps() {
        for fam in [
            Family::<f64>::equidistant_polynomial(),
            Family::equidistant_poles(),
            Family::chebyshev_poles(),
            Family::gaussian_poles(),
            Family::gaussian_equilibrium(),
        ] {
            for n in [20, 40] {
                let inst = fam.instance(n, Normalization::MaxOne).unwrap();
                for w in inst.nodes().nodes().windows(2) {
                    let m = 0.5 * (w[0] + w[1]);
                    assert!(inst.potential.deriv(m, 2).unwrap() > 0.0, "{} n={n} x={m}", fam.label());
                }
            }
        }
    }

    #[test]
    fn convergence_examples() {
        let ch = Family::new(DensitySpec::<f64>::chebyshev(), NodeRule::Quantile, FieldFamily::None).unwrap();
        let sw = family_sweep(&ch, &[20], Normalization::MaxOne).unwrap();
        let rows = convergence_experiment(&sw, TestFunction::Exp, 1001).unwrap();
        assert!(rows[0].sup_error < 1e-12);

        let eq = family_sweep(&Family::<f64>::equidistant_polynomial(), &[10, 20, 40], Normalization::MaxOne).unwrap();
        let rows = convergence_experiment(&eq, TestFunction::Runge, 2001).unwrap();
        assert!(rows[2].sup_error > rows[1].sup_error && rows[1].sup_error > rows[0].sup_error);
        assert!(convergence_experiment(&eq, TestFunction::Abs, 1).is_err());
    }

    #[test]
    fn family_validation() {
        assert!(Family::new(DensitySpec::<f64>::chebyshev(), NodeRule::Equidistant, FieldFamily::None).is_err());
        assert!(Family::new(DensitySpec::<f64>::uniform(), NodeRule::ChebyshevFirstKind, FieldFamily::None).is_err());
        assert_eq!(Family::<f64>::gaussian_equilibrium().label(), "truncated_gaussian/quantile/equilibrium");
    }
}
