use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or construction parameter violates an invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// A Jacobi-Anger table was requested with too small a cutoff.
    #[error("harmonic cutoff {cutoff} too small for z = {z}: tail mass {tail:e} exceeds {limit:e}")]
    Truncation {
        z: f64,
        cutoff: usize,
        tail: f64,
        limit: f64,
    },

    /// The supplied energy or wavenumber is not a root of the boundary determinant.
    #[error("not a boundary root: smallest singular value ratio {ratio:e}")]
    NotARoot { ratio: f64 },

    /// Caller broke an operation contract (mismatched sampling, etc).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A time series cannot resolve the frequencies it is expected to carry.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// A node could not be classified unambiguously.
    #[error("ambiguous radial node near r = {radius}")]
    AmbiguousNode { radius: f64 },

    /// Numerical procedure failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Parameter { .. } => "parameter",
            Error::Truncation { .. } => "truncation",
            Error::NotARoot { .. } => "not_a_root",
            Error::Contract(_) => "contract",
            Error::Sampling(_) => "sampling",
            Error::AmbiguousNode { .. } => "ambiguous_node",
            Error::Numerical(_) => "numerical",
        }
    }

    /// True for errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Parameter { .. } | Error::Contract(_) | Error::Sampling(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
