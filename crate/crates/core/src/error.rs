use thiserror::Error;

/// Errors raised by the toolkit.
///
/// Numerical failures carry the name of the operation that produced them so
/// that callers several layers up can still tell where the problem started.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index {index} out of range for {len} columns")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("duplicate index {0} in index set")]
    DuplicateIndex(usize),

    #[error("dimension mismatch in {operation}: expected {expected}, found {found}")]
    DimensionMismatch {
        operation: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{operation}: matrix is rank deficient within tolerance")]
    RankDeficient { operation: &'static str },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("subset enumeration needs {requested} subsets, budget is {budget}")]
    BudgetExceeded { requested: u128, budget: u64 },

    #[error("invalid order {order} for a matrix with {cols} columns")]
    InvalidOrder { order: usize, cols: usize },

    #[error("delta {delta} is outside the sharp region for K = {k}")]
    OutOfSharpRegion { k: usize, delta: f64 },

    #[error("delta2 = {delta2} exceeds delta_(K+1) = {delta_k1}")]
    InvalidDeltaOrder { delta2: f64, delta_k1: f64 },

    #[error("degenerate denominator {0} in {1}")]
    DegenerateDenominator(f64, &'static str),

    #[error("gamma {gamma} must lie in (0, {upper})")]
    GammaOutOfRange { gamma: f64, upper: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("index set is not a proper subset of the support")]
    NotProperSubset,

    #[error("A^T v vanished for every drawn noise vector")]
    DegenerateMatrix,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
