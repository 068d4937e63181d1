//! Floater–Hormann weights on equidistant nodes and the potential of their
//! implicit poles.

use rayon::prelude::*;

use crate::analysis::{growth_slope, GrowthFit};
use crate::barycentric::{weight_ratio_log, Normalization, WeightSet};
use crate::density::{DensitySpec, NodeSet};
use crate::error::{Error, Result};
use crate::potential::{log_potential, ExternalField, Pole};
use crate::roots::{alternating_integer_roots, PoleSet};
use crate::scalar::Real;

/// Largest `d` whose weights are summed in `u128` (they are bounded by `2^d`).
pub const EXACT_MAX_D: usize = 126;

/// Grid size for the range of the pole potential.
pub const FH_GRID: usize = 1001;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FHMode {
    FixedD,
    Proportional { c_fh: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FHConfig {
    pub n: usize,
    pub d: usize,
    pub mode: FHMode,
}

impl FHConfig {
    pub fn fixed(n: usize, d: usize) -> Result<Self> {
        if d > n {
            return Err(Error::Precondition(format!("blending degree d = {d} exceeds n = {n}")));
        }
        if n == 0 {
            return Err(Error::Precondition("need n >= 1".into()));
        }
        Ok(Self {
            n,
            d,
            mode: FHMode::FixedD,
        })
    }

    /// `d = round(c_fh n)`.
    pub fn proportional(n: usize, c_fh: f64) -> Result<Self> {
        if !(c_fh > 0.0 && c_fh <= 1.0) {
            return Err(Error::Precondition(format!("c_fh = {c_fh} must lie in (0, 1]")));
        }
        if n == 0 {
            return Err(Error::Precondition("need n >= 1".into()));
        }
        let d = ((c_fh * n as f64).round() as usize).min(n);
        Ok(Self {
            n,
            d,
            mode: FHMode::Proportional { c_fh },
        })
    }

    pub fn nodes<T: Real>(&self) -> Result<NodeSet<T>> {
        NodeSet::equidistant(self.n)
    }
}

fn index_window(n: usize, d: usize, i: usize) -> (usize, usize) {
    (i.saturating_sub(d), i.min(n - d))
}

/// `|w_i| = sum_{k in J_i} C(d, i - k)` with
/// `J_i = [max(0, i - d), min(i, n - d)]`, in exact integer arithmetic.
pub fn fh_abs_weights_exact(n: usize, d: usize) -> Result<Vec<u128>> {
    if d > n {
        return Err(Error::Precondition(format!("blending degree d = {d} exceeds n = {n}")));
    }
    if d > EXACT_MAX_D {
        return Err(Error::Precondition(format!("exact weights need d <= {EXACT_MAX_D}, got {d}")));
    }
    // Pascal rows: additions only, so nothing exceeds 2^d
    let mut binom = vec![0u128; d + 1];
    binom[0] = 1;
    for r in 1..=d {
        for j in (1..=r).rev() {
            binom[j] += binom[j - 1];
        }
    }
    Ok((0..=n)
        .map(|i| {
            let (lo, hi) = index_window(n, d, i);
            (lo..=hi).map(|k| binom[i - k]).sum()
        })
        .collect())
}

/// `log |w_i|`; exact sums for `d <= EXACT_MAX_D`, log-sum-exp of log
/// binomials beyond.
fn fh_log_abs(n: usize, d: usize) -> Result<Vec<f64>> {
    if d <= EXACT_MAX_D {
        return Ok(fh_abs_weights_exact(n, d)?.into_iter().map(|w| (w as f64).ln()).collect());
    }
    let mut lbin = vec![0.0f64; d + 1];
    for j in 1..=d {
        lbin[j] = lbin[j - 1] + (((d - j + 1) as f64) / j as f64).ln();
    }
    Ok((0..=n)
        .map(|i| {
            let (lo, hi) = index_window(n, d, i);
            let terms = (lo..=hi).map(|k| lbin[i - k]);
            let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
            m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
        })
        .collect())
}

/// Floater–Hormann weights with sign `(-1)^i`.
pub fn fh_weights<T: Real>(cfg: &FHConfig, normalization: Normalization) -> Result<WeightSet<T>> {
    if cfg.d > cfg.n {
        return Err(Error::Precondition(format!("blending degree d = {} exceeds n = {}", cfg.d, cfg.n)));
    }
    let log_abs = fh_log_abs(cfg.n, cfg.d)?
        .into_iter()
        .map(|v| T::from(v).expect("f64 fits the scalar type"))
        .collect();
    let signs = (0..=cfg.n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    WeightSet::from_log_abs(signs, log_abs, normalization)
}

/// One row of the F-H report.
#[derive(Clone, Debug)]
pub struct FHReportRow {
    pub n: usize,
    pub d: usize,
    /// `max - min` of `U_uniform + phi_n` over the grid, `phi_n` built from
    /// the recovered poles.
    pub range_u_hat: f64,
    pub ratio_log: f64,
    pub poles: PoleSet,
}

pub const FH_CSV_HEADER: &str = "n,d,range_u_hat,ratio_log";
pub const POLES_CSV_HEADER: &str = "re,im,residual";

/// Poles as an external field (multiplicity one each).
pub fn pole_field(poles: &PoleSet) -> Result<ExternalField<f64>> {
    ExternalField::poles(poles.poles.iter().map(|p| Pole::new(p.re, p.im, 1)).collect())
}

fn report_row(cfg: &FHConfig) -> Result<FHReportRow> {
    let ws = fh_weights::<f64>(cfg, Normalization::MaxOne)?;
    let poles = alternating_integer_roots(&fh_abs_weights_exact(cfg.n, cfg.d)?)?;
    let field = pole_field(&poles)?;
    let uniform = DensitySpec::<f64>::uniform();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..FH_GRID {
        let x = -1.0 + 2.0 * j as f64 / (FH_GRID - 1) as f64;
        let u = log_potential(&uniform, x)? + field.value(num_complex::Complex::new(x, 0.0), cfg.n);
        lo = lo.min(u);
        hi = hi.max(u);
    }
    Ok(FHReportRow {
        n: cfg.n,
        d: cfg.d,
        range_u_hat: hi - lo,
        ratio_log: weight_ratio_log(&ws),
        poles,
    })
}

/// Range of the pole potential for each configuration (in the given order).
pub fn fh_potential_report(cfgs: &[FHConfig]) -> Result<Vec<FHReportRow>> {
    cfgs.par_iter().map(report_row).collect()
}

/// Slope of `log(max|w| / min|w|)` against `n`; proportional mode only.
pub fn fh_ratio_growth(cfgs: &[FHConfig]) -> Result<GrowthFit<f64>> {
    if cfgs.iter().any(|c| c.mode == FHMode::FixedD) {
        return Err(Error::Precondition("ratio growth needs proportional mode".into()));
    }
    let ns: Vec<usize> = cfgs.iter().map(|c| c.n).collect();
    let logs = cfgs
        .iter()
        .map(|c| fh_weights::<f64>(c, Normalization::Raw).map(|w| weight_ratio_log(&w)))
        .collect::<Result<Vec<_>>>()?;
    growth_slope(&ns, &logs)
}

pub fn fh_report_csv(rows: &[FHReportRow]) -> String {
    let mut s = format!("{FH_CSV_HEADER}\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.16e},{:.16e}\n", r.n, r.d, r.range_u_hat, r.ratio_log));
    }
    s
}

pub fn poles_csv(poles: &PoleSet) -> String {
    let mut s = format!("{POLES_CSV_HEADER}\n");
    for (p, r) in poles.poles.iter().zip(&poles.residual_norms) {
        s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", p.re, p.im, r));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barycentric::weights_from_nodes;
    use proptest::prelude::*;

    // Independent oracle: the blend weights straight from the definition
    // w_i = sum_k (-1)^k prod_{j in [k, k+d], j != i} 1 / (x_i - x_j)
    // on integer nodes 0..n, scaled so that min |w| = 1.
    fn definition_weights(n: usize, d: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..=n)
            .map(|i| {
                let mut s = 0.0;
                for k in 0..=n - d {
                    if i < k || i > k + d {
                        continue;
                    }
                    let mut p = 1.0;
                    for j in k..=k + d {
                        if j != i {
                            p /= i as f64 - j as f64;
                        }
                    }
                    s += if k % 2 == 0 { p } else { -p };
                }
                s.abs()
            })
            .collect();
        let m = w.iter().copied().fold(f64::INFINITY, f64::min);
        w.iter().map(|v| v / m).collect()
    }

    #[test]
    fn berrut_weights() {
        for n in [1, 5, 12] {
            assert!(fh_abs_weights_exact(n, 0).unwrap().iter().all(|&w| w == 1));
        }
    }

    #[test]
    fn d2_n6() {
        assert_eq!(fh_abs_weights_exact(6, 2).unwrap(), vec![1, 3, 4, 4, 4, 3, 1]);
    }

    #[test]
    fn full_degree_is_binomial_and_matches_polynomial() {
        for n in 1..=12 {
            let w = fh_abs_weights_exact(n, n).unwrap();
            let mut c = 1u128;
            for (i, &wi) in w.iter().enumerate() {
                assert_eq!(wi, c);
                c = c * (n - i) as u128 / (i as u128 + 1);
            }
            let cfg = FHConfig::fixed(n, n).unwrap();
            let fh = fh_weights::<f64>(&cfg, Normalization::MaxOne).unwrap();
            let ns = NodeSet::<f64>::equidistant(n).unwrap();
            let poly = weights_from_nodes(&ns, &ExternalField::None, Normalization::MaxOne).unwrap();
            for (a, b) in fh.scaled().iter().zip(poly.scaled()) {
                assert!((a - b).abs() <= 1e-12, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matches_blend_definition() {
        for n in 1..=14 {
            for d in 0..=n {
                let exact = fh_abs_weights_exact(n, d).unwrap();
                let oracle = definition_weights(n, d);
                let m = *exact.iter().min().unwrap() as f64;
                for (i, (&e, &o)) in exact.iter().zip(&oracle).enumerate() {
                    assert!((e as f64 / m - o).abs() <= 1e-9 * o, "n={n} d={d} i={i}");
                }
            }
        }
    }

    #[test]
    fn log_domain_matches_exact() {
        for (n, d) in [(40, 20), (150, 100), (200, 126)] {
            let exact = fh_abs_weights_exact(n, d).unwrap();
            let mut lbin = vec![0.0f64; d + 1];
            for j in 1..=d {
                lbin[j] = lbin[j - 1] + (((d - j + 1) as f64) / j as f64).ln();
            }
            for (i, &e) in exact.iter().enumerate() {
                let (lo, hi) = index_window(n, d, i);
                let l = (lo..=hi).map(|k| lbin[i - k].exp()).sum::<f64>().ln();
                assert!((l - (e as f64).ln()).abs() <= 1e-12 * l.abs().max(1.0));
            }
        }
        let big = fh_weights::<f64>(&FHConfig::fixed(300, 200).unwrap(), Normalization::Raw).unwrap();
        assert!(big.raw_log_abs().iter().all(|v| v.is_finite()));
        assert!((big.raw_log_abs()[150] - 200.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn ratio_is_power_of_two() {
        for d in 1..=8 {
            for n in 2 * d + 2..2 * d + 12 {
                let w = fh_abs_weights_exact(n, d).unwrap();
                let max = *w.iter().max().unwrap();
                let min = *w.iter().min().unwrap();
                assert_eq!(max, 1u128 << d);
                assert_eq!(min, 1);
            }
        }
    }

    #[test]
    fn bad_configs() {
        assert!(FHConfig::fixed(4, 5).is_err());
        assert!(FHConfig::proportional(10, 0.0).is_err());
        assert!(FHConfig::proportional(10, 1.5).is_err());
        assert_eq!(FHConfig::proportional(20, 0.25).unwrap().d, 5);
        let fixed = [FHConfig::fixed(20, 2).unwrap(), FHConfig::fixed(40, 2).unwrap(), FHConfig::fixed(60, 2).unwrap()];
        assert!(matches!(fh_ratio_growth(&fixed), Err(Error::Precondition(_))));
    }

    #[test]
    fn ratio_growth_slopes() {
        let ns: Vec<usize> = (1..=8).map(|k| 20 * k).collect();
        for c in [0.25, 1.0] {
            let cfgs: Vec<FHConfig> = ns.iter().map(|&n| FHConfig::proportional(n, c).unwrap()).collect();
            let fit = fh_ratio_growth(&cfgs).unwrap();
            let target = c * 2f64.ln();
            assert!((fit.slope - target).abs() <= 0.05 * target, "c={c}: {}", fit.slope);
        }
    }

    #[test]
    fn pole_potential_range_decays() {
        for d in [0, 2, 4] {
            let cfgs: Vec<FHConfig> = [20, 40, 60].iter().map(|&n| FHConfig::fixed(n, d).unwrap()).collect();
            let rows = fh_potential_report(&cfgs).unwrap();
            for r in &rows {
                assert!(r.poles.max_residual() <= 1e-8, "d={d} n={}", r.n);
                assert!(r.poles.on_interval.iter().all(|&b| !b));
                assert!(r.poles.poles.iter().all(|p| p.im.abs() > 1e-9 || p.re.abs() > 1.0));
            }
            assert!(rows[0].range_u_hat > rows[1].range_u_hat && rows[1].range_u_hat > rows[2].range_u_hat, "d={d}");
        }
    }

    #[test]
    fn denominator_degree_is_n_minus_d() {
        // symmetric nodes and weights make P even or odd, so an odd n - d
        // loses its top coefficient as in the Berrut case
        for (n, d) in [(20, 0), (21, 0), (30, 3), (30, 4), (48, 12), (64, 16), (64, 63)] {
            let r = &fh_potential_report(&[FHConfig::fixed(n, d).unwrap()]).unwrap()[0];
            let expected = (n - d) - (n - d) % 2;
            assert_eq!(r.poles.degree, expected, "n={n} d={d}");
            assert_eq!(r.poles.len(), expected);
            assert!(r.poles.max_residual() <= 1e-12);
        }
    }

    #[test]
    fn poles_stay_off_the_interval() {
        for d in 0..=4 {
            for n in [2 * d + 2, 2 * d + 9, 40] {
                let r = &fh_potential_report(&[FHConfig::fixed(n, d).unwrap()]).unwrap()[0];
                assert!(r.poles.poles.iter().all(|p| p.im.abs() > 1e-6), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn pole_potential_fails_beyond_cap() {
        assert!(fh_potential_report(&[FHConfig::fixed(80, 2).unwrap()]).is_err());
    }

    #[test]
    fn csv_shapes() {
        let rows = fh_potential_report(&[FHConfig::fixed(10, 1).unwrap()]).unwrap();
        let csv = fh_report_csv(&rows);
        assert!(csv.starts_with("n,d,range_u_hat,ratio_log\n10,1,"));
        let p = poles_csv(&rows[0].poles);
        assert_eq!(p.lines().count(), rows[0].poles.len() + 1);
    }

    proptest! {
        #[test]
        fn weights_are_symmetric(n in 1usize..60, frac in 0.0f64..=1.0) {
            let d = ((n as f64) * frac).floor() as usize;
            let w = fh_abs_weights_exact(n, d).unwrap();
            for i in 0..=n {
                prop_assert_eq!(w[i], w[n - i]);
            }
        }
    }
}
