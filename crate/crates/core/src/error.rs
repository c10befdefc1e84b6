use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid Bethe configuration: {0}")]
    InvalidConfig(String),

    #[error("spectral argument {arg} lies on the weight pole e^(2λ) = q²")]
    Pole { arg: Complex64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("Hilbert space dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("site {site} out of range 1..={p0}")]
    SiteOutOfRange { site: usize, p0: usize },

    #[error("nested Bethe ansatz needs the Exchange lift when some multiplicity exceeds 1")]
    UnsupportedConvention,

    #[error("rapidities {i} and {j} at level {level} coincide")]
    Collision { level: usize, i: usize, j: usize },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigensolver did not converge")]
    Eigensolver,

    #[error("state vector vanishes identically")]
    ZeroVector,
}

pub type Result<T> = std::result::Result<T, Error>;
