use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of the container file format.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad magic: expected \"PODGEQ1\", found {0:?}")]
    Magic(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed header: {0}")]
    Header(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite field")]
    NonFinite,
    #[error("grid mismatch: {0} vs {1} cells")]
    GridMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("CFL violated: {bound} requires dt below {limit:.6e}, got dt = {dt:.6e}")]
    Cfl {
        bound: &'static str,
        limit: f64,
        dt: f64,
    },
    #[error("inviscid case unsupported (d = 0)")]
    Inviscid,
    #[error("non-finite field at step {step}")]
    NonFiniteStep { step: usize },
    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolve { iterations: usize, residual: f64 },
    #[error("empty snapshot set")]
    EmptySnapshots,
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("rank exceeds numerical rank: requested {requested}, available {available}")]
    RankExceedsNumericalRank { requested: usize, available: usize },
    #[error("all-zero spectrum")]
    ZeroSpectrum,
    #[error("basis not orthonormal (defect {0:.3e})")]
    NotOrthonormal(f64),
    #[error("Newton iteration did not converge (residual {residual:.3e} after {iterations} iterations)")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian (pivot {0:.3e})")]
    SingularJacobian(f64),
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("basis size {0} exceeds the enrichment cap {1}")]
    BasisOverflow(usize, usize),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors caused by user input (bad configuration or files) rather than
    /// by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Format(_)
                | Error::Io(_)
                | Error::InvalidParameter(_)
                | Error::GridMismatch(..)
                | Error::Cfl { .. }
                | Error::Inviscid
        )
    }
}
