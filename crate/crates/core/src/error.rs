use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("kernel dimension is {dim}, expected 1")]
    DegenerateKernel { dim: usize },
    #[error("kernel vector has non-positive component {value:e} at index {index}")]
    NonPositiveEntry { index: usize, value: f64 },
    #[error("row {row} does not sum to zero (sum {sum:e})")]
    NotZeroRowSum { row: usize, sum: f64 },
    #[error("time {t} outside [0, {horizon})")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("solution blew up at t = {t}")]
    Blowup { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("step size {step:e} underflowed at t = {t}")]
    StepUnderflow { t: f64, step: f64 },
    #[error("regulator kind not supported here: {0}")]
    UnsupportedRegulator(String),
    #[error("model not supported here: {0}")]
    UnsupportedModel(String),
    #[error("pinning configuration required but absent")]
    MissingPinning,
    #[error("stacked matrix is not negative definite on the transverse space (eigenvalue {eigenvalue:e})")]
    NotNegativeInTS { eigenvalue: f64 },
    #[error("stacked matrix is not negative definite (largest eigenvalue {eigenvalue:e})")]
    NotNegativeDefinite { eigenvalue: f64 },
    #[error("structural assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("configuration error: {0}")]
    Config(String),
}
