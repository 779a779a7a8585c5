use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value passed to tape variable: {0}")]
    NonFiniteInput(f64),

    #[error("simulation produced a non-finite state at step {step}")]
    NonFiniteState { step: u64 },

    #[error("non-finite loss at iteration {iter}")]
    NonFiniteLoss { iter: usize },

    #[error("loss diverged at iteration {iter}: {loss:.6e} vs initial {initial:.6e}")]
    Diverged { iter: usize, loss: f64, initial: f64 },

    #[error("negative normal force: {0}")]
    NegativeNormalForce(f64),

    #[error("failed to settle within {budget:.3} s (residual cap speed {residual:.3e} m/s)")]
    SettleFailed { budget: f64, residual: f64 },

    #[error("cannot settle: gravity must be positive (got {0})")]
    ZeroGravity(f64),

    #[error("policy step {step} timed out after {timeout:.3} s")]
    StepTimeout { step: usize, timeout: f64 },

    #[error("trajectory gait count mismatch: ground truth has {gt}, prediction has {predicted} (first divergence at gait {at})")]
    GaitCountMismatch { gt: usize, predicted: usize, at: usize },

    #[error("trajectory frame is missing control direction codes")]
    MissingDirections,

    #[error("cap pairing ambiguous: caps {a} and {b} of different rods are {dist_mm:.3} mm apart")]
    AmbiguousCapPairing { a: usize, b: usize, dist_mm: f64 },

    #[error("observed state inconsistent with cable sensors: channel {channel} implies {implied:.4} m but sensed {sensed:.4} m")]
    CableConsistency { channel: usize, implied: f64, sensed: f64 },

    #[error("pose not recognized as a rest configuration: {0}")]
    UnrecognizedPose(String),

    #[error("body {0} has no actuation label for the detachment policy")]
    UnlabeledBody(usize),

    #[error("gait search budget exhausted after {spent} rollout segments")]
    BudgetExhausted { spent: usize },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse { path: String, line: usize, message: String },

    #[error("invalid robot description: {0}")]
    InvalidDescription(String),

    #[error("unknown learnable parameter: {0}")]
    UnknownParameter(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}
