use thiserror::Error;

/// Crate-wide error type. Variants are grouped by the exit code the CLI
/// maps them to: validation (1), numerical convergence (2), I/O (3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cube: {0}")]
    InvalidCube(String),

    #[error("invalid parameter {key}: {message}")]
    InvalidParameter { key: String, message: String },

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("physical window too small: boundary tail mass {tail:.3e} exceeds 1e-6 of total")]
    WindowTooSmall { tail: f64 },

    #[error("supports are not transversal: distance {dist} < {required}")]
    NotTransversal { dist: f64, required: f64 },

    #[error("regime violation: {0}")]
    RegimeViolation(String),

    #[error("time quadrature did not converge: last two refinements differ by {rel:.3e}")]
    NonConvergentQuadrature { rel: f64 },

    #[error("oscillatory quadrature did not stabilize after {0} refinements")]
    QuadratureExhausted(usize),

    #[error("quadruple sum has significantly negative real part ({rel:.3e} relative)")]
    NegativeQuadrupleSum { rel: f64 },

    #[error("derivative oracle failure: finite-difference refinements disagree by {rel:.3e}")]
    DerivativeOracle { rel: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// CLI exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergentQuadrature { .. }
            | Error::QuadratureExhausted(_)
            | Error::NegativeQuadrupleSum { .. }
            | Error::DerivativeOracle { .. } => 2,
            Error::Io { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
