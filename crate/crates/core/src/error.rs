use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("matrix entries must be finite")]
    NonFiniteEntry,

    #[error("operator is not unitary: deviation {0:.3e}")]
    NotUnitary(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cost guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("Fourier grid too narrow: tail bound {tail:.3e} exceeds 1% of grid mass {mass:.3e}")]
    WidenGrid { tail: f64, mass: f64 },

    #[error("unbound generator `{0}`")]
    UnboundGenerator(String),

    #[error("eigensolver did not converge after {0} sweeps")]
    EigenFailure(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
