use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (relative deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("operator is zero")]
    ZeroOperator,
    #[error("state trace {0} is outside the allowed range")]
    BadTrace(f64),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("basis is not orthonormal (residual {0:.3e})")]
    NonOrthonormalBasis(f64),
    #[error("measurement elements do not form a valid PVM/POVM: {0}")]
    InvalidMeasurement(String),
    #[error("support condition violated: {0}")]
    Support(String),
    #[error("state is not a minimum-uncertainty state (residual {0:.3e})")]
    NotMus(f64),
    #[error("state is not pure (purity defect {0:.3e})")]
    NotPure(f64),
    #[error("state is not measured-quantum for the split: {0}")]
    NotMq(String),
    #[error("witness reconstruction residual {0:.3e} exceeds tolerance")]
    InconsistentWitness(f64),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("dimension {0} exceeds the supported limit {1}")]
    DimTooLarge(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(format!("line {}, column {}: {}", e.line(), e.column(), e))
    }
}
