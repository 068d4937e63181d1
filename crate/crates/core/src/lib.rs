//! Barycentric interpolation on [-1, 1] analysed through logarithmic
//! potentials: node generation from densities, weights from external
//! fields, Lebesgue constants, bound checks and Floater–Hormann weights.
//!
//! Everything is generic over the scalar type (`f32` or `f64`); the `*64`
//! aliases fix it to `f64`.

// `!(x > 0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod barycentric;
pub mod density;
pub mod error;
pub mod fh;
pub mod optimize;
pub mod potential;
pub mod quadrature;
pub mod roots;
pub mod scalar;
pub mod special;

pub use analysis::{
    bounds_report, inter_potential_points, measure_delta, sweep, BoundsReport, DeltaBounds, Family, FieldFamily,
    InterPotentialSet, NodeRule, Sweep,
};
pub use barycentric::{
    basis_abs, interpolate, lebesgue_constant, lebesgue_function, weight_ratio_log, weights_from_nodes, LebesgueReport,
    Normalization, WeightSet,
};
pub use density::{DensityKind, DensitySpec, NodeSet, NodeSource};
pub use error::{Error, Result};
pub use fh::{fh_potential_report, fh_ratio_growth, fh_weights, FHConfig, FHMode, FHReportRow};
pub use potential::{
    complex_grid_sample, log_potential, potential_extrema, BuiltinField, ContinuousPotential, DiscretePotential,
    ExternalField, FieldKind, Pole, PotentialExtrema,
};
pub use roots::{denominator_roots, PoleSet};
pub use scalar::Real;

pub type DensitySpec64 = DensitySpec<f64>;
pub type NodeSet64 = NodeSet<f64>;
pub type ExternalField64 = ExternalField<f64>;
pub type ContinuousPotential64 = ContinuousPotential<f64>;
pub type DiscretePotential64 = DiscretePotential<f64>;
pub type WeightSet64 = WeightSet<f64>;
pub type Family64 = Family<f64>;
