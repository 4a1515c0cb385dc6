use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no configurations")]
    NoConfigurations,

    #[error("configuration for task {found} passed to job list of task {expected}")]
    MixedTaskIds { expected: u64, found: u64 },

    #[error("duplicate task id {0}")]
    DuplicateTask(u64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid resource amount {0} (must be finite and >= 0)")]
    InvalidResource(f64),

    #[error("the minimal-resource allocation already exceeds the bounds")]
    InfeasibleBaseline,

    #[error("negative horizon {0}")]
    NegativeHorizon(f64),

    #[error("no feasible scheme")]
    NoFeasibleScheme,

    #[error("time going backwards: state at {current} s, requested {requested} s")]
    TimeReversal { current: f64, requested: f64 },

    #[error("zero range between target and sensor")]
    ZeroRange,

    #[error("snr must be positive, got {0}")]
    NonPositiveSnr(f64),

    #[error("degenerate geometry")]
    DegenerateGeometry,

    #[error("geometry too degenerate for MC conversion ({rejected} of {requested} samples rejected)")]
    ExcessiveRejections { rejected: usize, requested: usize },

    #[error("covariance is not positive semi-definite")]
    NonPsdCovariance,

    #[error("empty sample list")]
    EmptySamples,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("infeasible config: {0}")]
    InfeasibleConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
