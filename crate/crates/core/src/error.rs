use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty realization: no rays fall inside the horizon")]
    EmptyRealization,

    #[error("frequency grid is not uniform at point {index}")]
    NonUniformGrid { index: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("silent profile: every power sample is zero")]
    SilentProfile,

    #[error("noise floor has not been estimated")]
    NoiseFloorMissing,

    #[error("profile below noise floor: no bin exceeds {threshold_db:.2} dB")]
    BelowNoiseFloor { threshold_db: f64 },

    #[error("profile too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("non-finite sample at bin {index}")]
    NonFinite { index: usize },

    #[error("k = {k} exceeds the number of samples ({n})")]
    TooManyClusters { k: usize, n: usize },

    #[error(
        "solver stalled after {iterations} iterations \
         (primal residual {primal_residual:.3e}, dual residual {dual_residual:.3e})"
    )]
    SolverStalled {
        iterations: usize,
        primal_residual: f64,
        dual_residual: f64,
    },

    #[error("insufficient clusters: {found} usable, need at least 2")]
    InsufficientClusters { found: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
