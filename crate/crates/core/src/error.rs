use thiserror::Error;

/// Errors raised by the sizing library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unstable system: mean demand {mean_demand} is not below capacity {capacity}")]
    Unstable { mean_demand: f64, capacity: f64 },

    /// The capacity coincides with an integer state, so that state has zero drift.
    /// Callers may retry with a slightly perturbed capacity.
    #[error("singular drift: capacity {capacity} is within tolerance of state {state}")]
    DriftSingular { capacity: f64, state: usize },

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("domain error in `{helper}`: {reason}")]
    Domain {
        helper: &'static str,
        reason: String,
    },

    #[error("bisection did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("outage target {epsilon} cannot be met")]
    InfeasibleTarget { epsilon: f64 },

    #[error("mixture component {index} (capacity {capacity}): {source}")]
    MixtureComponent {
        index: usize,
        capacity: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalInstability(_) | Error::NoConvergence { .. } => true,
            Error::MixtureComponent { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
