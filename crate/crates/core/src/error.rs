use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("required Fock dimension {required} exceeds the configured maximum {max}")]
    CutoffOverflow { required: usize, max: usize },

    #[error("tail mass {tail:e} still above target {target:e} at the maximum dimension {max}")]
    NonConvergedTail { tail: f64, target: f64, max: usize },

    #[error("state `{0}` has no proper P-function; use the exact evolution path")]
    NotPRepresentable(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("P-function quadrature not converged: doubling nodes moved an entry by {shift:e}")]
    QuadratureNotConverged { shift: f64 },

    #[error("homodyne grid too small: boundary mass {boundary_mass:e}")]
    GridTooSmall { boundary_mass: f64 },

    #[error("heterodyne rejection envelope too tight: density/envelope ratio {ratio}")]
    EnvelopeTooTight { ratio: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("a detector's sample mean is zero; the g2 ratio is undefined")]
    ZeroMarginalMean,

    #[error("no single-click events for detector {0}; 2 P2 P0 / P1^2 is undefined")]
    ZeroP1(usize),

    #[error("quantity undefined for the vacuum state")]
    UndefinedForVacuum,

    #[error("detector occupancies vanish; g1 is undefined")]
    VacuumDetectors,

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("gamma0*dt = {0} is outside the weak-coupling domain (<= 0.1)")]
    ApproximationDomain(f64),

    #[error("sample batch channel {got} does not support {wanted}")]
    ChannelMismatch { got: String, wanted: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse grouping used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Json(_) | Error::InvalidParameter(_) => ErrorKind::Config,
            Error::Io(_) | Error::Csv(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
