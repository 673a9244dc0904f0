use thiserror::Error;

/// Errors shared by all numerical modules.
#[derive(Debug, Error)]
pub enum FhjError {
    #[error("fractional order {0} outside the supported range {1}")]
    InvalidOrder(f64, &'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("paths live on different grids")]
    GridMismatch,

    #[error("node index {index} out of range (last valid {last})")]
    IndexOutOfRange { index: usize, last: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("path needs at least {0} nodes")]
    TooFewNodes(usize),

    #[error("history is not representable at order alpha: reconstruction error {error:.3e} exceeds threshold {threshold:.3e}")]
    HistoryNotRepresentable { error: f64, threshold: f64 },

    #[error("selection velocity leaves the admissible ball by {excess:.3e} at t={t:.6}")]
    PolicyViolation { t: f64, excess: f64 },

    #[error("concatenation origin mismatch: {0}")]
    OriginMismatch(String),

    #[error("overflow while composing gamma/exponential constants ({0})")]
    Overflow(&'static str),

    #[error("candidate solution does not provide analytic derivatives")]
    MissingDerivatives,

    #[error("search failed: {0}")]
    SearchFailed(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FhjError>;
