use thiserror::Error;

/// Errors surfaced by the solver suite.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty state")]
    EmptyState,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pressure required")]
    PressureRequired,
    #[error("diverged at stage {stage}")]
    Diverged { stage: usize },
    #[error("degenerate node c = {0:e}")]
    DegenerateNode(f64),
    #[error("degree {s} not in ROCK2 table; nearest available: {nearest:?}")]
    UnsupportedDegree { s: usize, nearest: Vec<usize> },
    #[error("required stage count {required} exceeds cap {cap}")]
    StageCap { required: usize, cap: usize },
    #[error("AP1 requires boundary time derivative")]
    MissingVelocityDt,
    #[error("PM3 requires exact boundary derivatives")]
    MissingExactDerivative,
    #[error("AP2W weights degenerate: {0}")]
    DegenerateWeights(String),
    #[error("coefficient table: {0}")]
    Table(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
