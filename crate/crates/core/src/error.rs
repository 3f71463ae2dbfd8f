use thiserror::Error;

/// Errors raised by the directional estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vector norm {norm:e} is too small to normalize")]
    ZeroVector { norm: f64 },

    #[error("log map undefined for antipodal points (dot = {dot})")]
    AntipodalPoints { dot: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    WrongDimension { expected: usize, actual: usize },

    #[error("latitude {lat} outside [-90, 90]")]
    LatOutOfRange { lat: f64 },

    #[error("point {index} is not unit-norm (norm = {norm})")]
    NotUnitNorm { index: usize, norm: f64 },

    #[error("adaptive quadrature failed to reach relative accuracy {target:e} (estimate {estimate:e})")]
    QuadratureFailure { target: f64, estimate: f64 },

    #[error("invalid kernel `{name}`: {reason}")]
    InvalidKernel { name: String, reason: String },

    #[error("kernel `{name}` has no second derivative")]
    KernelNotC2 { name: String },

    #[error("degenerate concentration: mean resultant length {r_bar} (bandwidth must be supplied manually)")]
    DegenerateConcentration { r_bar: f64 },

    #[error("rejection sampler acceptance rate {rate:e} below 1e-6 for concentration {nu}; use an inversion-based vMF sampler instead")]
    RejectionBudgetExceeded { nu: f64, rate: f64 },

    #[error("mean-shift numerator vanished (norm {norm:e}); weights cancel")]
    DegenerateStep { norm: f64 },

    #[error("gradient vanishes; step size undefined")]
    ZeroGradient,

    #[error("set is empty")]
    EmptySet,

    #[error("grid oracle supports q <= 2, got q = {q}")]
    DimensionTooLarge { q: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
