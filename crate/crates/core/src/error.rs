use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature failed to converge near r = {r}")]
    Integration { r: f64 },

    #[error("leaf crossed the cone at arc length {sigma}")]
    ConeCrossing { sigma: f64 },

    #[error("start regularization failed: {0}")]
    StartRegularization(String),

    #[error("coordinate {value} outside chart range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("focal point: |s k_{index}| = {product} >= 1")]
    Focal { index: usize, product: f64 },

    #[error("1 + f = {value} is not positive at l = {l}")]
    NonPositiveWidth { value: f64, l: f64 },

    #[error("beta0 = {beta0} sits on an indicial root")]
    Resonance { beta0: f64 },

    #[error("right-hand side decays too slowly: fitted exponent {exponent}, need > {required}")]
    SlowDecay { exponent: f64, required: f64 },

    #[error("unresolvable pole at xi = {xi} with numerator magnitude {numerator}")]
    UnresolvablePole { xi: f64, numerator: f64 },

    #[error("{stage} did not contract: factors {factors:?}")]
    Divergence { stage: &'static str, factors: Vec<f64> },

    #[error("iterate norm {norm} left the ball of radius {radius}")]
    BallViolation { norm: f64, radius: f64 },

    #[error("singular linear system at row {row}")]
    Singular { row: usize },

    #[error("energy increased from {before} to {after}")]
    DescentViolation { before: f64, after: f64 },

    #[error("boundary data not between barriers at {count} nodes")]
    InfeasibleBoundary { count: usize },

    #[error("barrier family is not monotone in eps near eps = {eps}")]
    NonMonotoneFamily { eps: f64 },

    #[error("window of radius {window} exceeds grid extent {extent}")]
    Resolution { window: f64, extent: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
