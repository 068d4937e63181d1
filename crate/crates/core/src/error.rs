use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside [-1, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid node set: {0}")]
    InvalidNodes(String),

    #[error("invalid external field: {0}")]
    InvalidField(String),

    #[error("nodes {index} and {next} coincide")]
    CoincidentNodes { index: usize, next: usize },

    #[error("evaluation at node x = {x}")]
    AtNode { x: f64 },

    #[error("quantile inversion failed for level {level}: {reason}")]
    Nonconvergence { level: f64, reason: String },

    #[error(
        "discrete potential is not convex on gap {gap} ({left}, {right}): U_n' signs at the gap ends are {sign_left} / {sign_right}, min U_n'' sample {min_second}"
    )]
    Convexity {
        gap: usize,
        left: f64,
        right: f64,
        sign_left: i8,
        sign_right: i8,
        min_second: f64,
    },

    #[error("inter-potential point on gap {gap} has residual {residual:e}")]
    Residual { gap: usize, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("pole recovery failed: {0}")]
    PoleRecovery(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T: crate::Real>(what: &'static str, value: T) -> Error {
    Error::Domain {
        what,
        value: value.to_f64().unwrap_or(f64::NAN),
    }
}
