use num_complex::Complex;

use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::potential::{log_potential_at, log_potential_curvature, log_potential_slope};
use crate::scalar::{from_usize, lit, Real};

/// A pole of the interpolant with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pole<T> {
    pub at: Complex<T>,
    pub multiplicity: usize,
}

impl<T: Real> Pole<T> {
    pub fn new(re: T, im: T, multiplicity: usize) -> Self {
        Self {
            at: Complex::new(re, im),
            multiplicity,
        }
    }
}

/// Named closed-form external fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuiltinField {
    /// `phi(z) = log|z - i/2| / 2 + log|z + i/2| / 2`, the limit field of
    /// `n` poles split evenly between `±i/2`.
    HalfImaginaryPair,
}

impl BuiltinField {
    pub fn name(self) -> &'static str {
        match self {
            Self::HalfImaginaryPair => "half_imaginary_pair",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "half_imaginary_pair" => Ok(Self::HalfImaginaryPair),
            other => Err(Error::InvalidField(format!("unknown builtin field '{other}'"))),
        }
    }

    fn value<T: Real>(self, z: Complex<T>) -> T {
        match self {
            Self::HalfImaginaryPair => {
                let h = lit::<T>(0.5);
                let up = z - Complex::new(T::zero(), h);
                let down = z + Complex::new(T::zero(), h);
                h * (up.norm().ln() + down.norm().ln())
            }
        }
    }

    fn deriv<T: Real>(self, x: T, order: u8) -> T {
        match self {
            Self::HalfImaginaryPair => {
                lit::<T>(0.5)
                    * (pole_deriv(x, Complex::new(T::zero(), lit(0.5)), order)
                        + pole_deriv(x, Complex::new(T::zero(), lit(-0.5)), order))
            }
        }
    }
}

/// d^k/dx^k of `log|x - p|` on the real line, for k = 1, 2.
fn pole_deriv<T: Real>(x: T, p: Complex<T>, order: u8) -> T {
    let a = x - p.re;
    let b2 = p.im * p.im;
    let r2 = a * a + b2;
    match order {
        1 => a / r2,
        _ => (b2 - a * a) / (r2 * r2),
    }
}

/// Discriminant of [`ExternalField`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    None,
    Poles,
    Functional,
    Equilibrium,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Poles => "poles",
            Self::Functional => "functional",
            Self::Equilibrium => "equilibrium",
        }
    }
}

/// The external field `phi_n` added to the node potential.
///
/// * `Poles`: `phi_n(z) = sum_j m_j log|z - p_j| / (n + 1)`.
/// * `Functional`: a fixed closed-form `phi`, independent of `n`.
/// * `Equilibrium`: `phi(x) = u_bar - U_w(x)`, which makes the continuous
///   potential of `density` constant and equal to `u_bar`.
#[derive(Clone, Debug, PartialEq)]
pub enum ExternalField<T> {
    None,
    Poles(Vec<Pole<T>>),
    Functional(BuiltinField),
    Equilibrium { u_bar: T, density: DensitySpec<T> },
}

impl<T: Real> ExternalField<T> {
    /// A pole field. Every pole must lie off [-1, 1].
    pub fn poles(poles: Vec<Pole<T>>) -> Result<Self> {
        for p in &poles {
            if p.multiplicity == 0 {
                return Err(Error::InvalidField(format!("pole {} has zero multiplicity", p.at)));
            }
            if !p.at.re.is_finite() || !p.at.im.is_finite() {
                return Err(Error::InvalidField(format!("pole {} is not finite", p.at)));
            }
            if p.at.im == T::zero() && p.at.re.abs() <= T::one() {
                return Err(Error::InvalidField(format!(
                    "pole {} lies on the interpolation interval [-1, 1]",
                    p.at.re
                )));
            }
        }
        Ok(Self::Poles(poles))
    }

    /// `n` poles at `±i/2`: `n/2` at each, the odd one out at `+i/2`.
    pub fn half_imaginary_poles(n: usize) -> Self {
        let up = n - n / 2;
        let down = n / 2;
        let h = lit::<T>(0.5);
        let mut poles = Vec::new();
        if up > 0 {
            poles.push(Pole::new(T::zero(), h, up));
        }
        if down > 0 {
            poles.push(Pole::new(T::zero(), -h, down));
        }
        Self::Poles(poles)
    }

    pub fn equilibrium(density: DensitySpec<T>, u_bar: T) -> Self {
        Self::Equilibrium { u_bar, density }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            Self::None => FieldKind::None,
            Self::Poles(_) => FieldKind::Poles,
            Self::Functional(_) => FieldKind::Functional,
            Self::Equilibrium { .. } => FieldKind::Equilibrium,
        }
    }

    /// Total pole count `m`; zero for fields without explicit poles.
    pub fn pole_count(&self) -> usize {
        match self {
            Self::Poles(p) => p.iter().map(|p| p.multiplicity).sum(),
            _ => 0,
        }
    }

    pub fn pole_list(&self) -> &[Pole<T>] {
        match self {
            Self::Poles(p) => p,
            _ => &[],
        }
    }

    /// Checks the field can be paired with `n + 1` nodes (`m <= n`).
    pub fn check_degree(&self, n: usize) -> Result<()> {
        let m = self.pole_count();
        if m > n {
            return Err(Error::InvalidField(format!("{m} poles exceed degree n = {n}")));
        }
        Ok(())
    }

    /// `(n + 1) phi_n(x)`, the log of the weight numerator. For pole fields
    /// this is the exact sum `sum_j m_j log|x - p_j|`.
    pub fn log_numerator(&self, x: T, n: usize) -> T {
        let scale = from_usize::<T>(n + 1);
        match self {
            Self::None => T::zero(),
            Self::Poles(poles) => poles
                .iter()
                .map(|p| from_usize::<T>(p.multiplicity) * (Complex::new(x, T::zero()) - p.at).norm().ln())
                .sum(),
            Self::Functional(f) => scale * f.value(Complex::new(x, T::zero())),
            Self::Equilibrium { u_bar, density } => {
                scale * (*u_bar - log_potential_at(density, Complex::new(x, T::zero())))
            }
        }
    }

    /// `phi_n(z)` at a complex point.
    pub fn value(&self, z: Complex<T>, n: usize) -> T {
        let scale = from_usize::<T>(n + 1);
        match self {
            Self::None => T::zero(),
            Self::Poles(poles) => {
                poles
                    .iter()
                    .map(|p| from_usize::<T>(p.multiplicity) * (z - p.at).norm().ln())
                    .sum::<T>()
                    / scale
            }
            Self::Functional(f) => f.value(z),
            Self::Equilibrium { u_bar, density } => *u_bar - log_potential_at(density, z),
        }
    }

    /// First or second derivative of `phi_n` on the real line. Pole and
    /// builtin fields are differentiated analytically; the equilibrium field
    /// uses a quadrature first derivative and, for densities without a
    /// closed form, a central difference of it (step `1e-6 max(1, |x|)`).
    pub fn deriv(&self, x: T, n: usize, order: u8) -> T {
        match self {
            Self::None => T::zero(),
            Self::Poles(poles) => {
                poles
                    .iter()
                    .map(|p| from_usize::<T>(p.multiplicity) * pole_deriv(x, p.at, order))
                    .sum::<T>()
                    / from_usize::<T>(n + 1)
            }
            Self::Functional(f) => f.deriv(x, order),
            Self::Equilibrium { density, .. } => {
                if order == 1 {
                    -log_potential_slope(density, x)
                } else {
                    -log_potential_curvature(density, x)
                }
            }
        }
    }

    /// The limit field `phi` seen by the continuous potential. Pole fields
    /// with fixed multiplicities vanish in the limit; use a builtin for
    /// pole families whose count grows with `n`.
    pub fn limit_value(&self, x: T) -> T {
        match self {
            Self::None | Self::Poles(_) => T::zero(),
            Self::Functional(f) => f.value(Complex::new(x, T::zero())),
            Self::Equilibrium { u_bar, density } => *u_bar - log_potential_at(density, Complex::new(x, T::zero())),
        }
    }
}
