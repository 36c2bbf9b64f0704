use thiserror::Error;

/// Errors raised by the estimation, bandwidth and diagnostic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bandwidth {h} outside the admissible interval [{low}, {high}] for this kernel")]
    BandwidthOutOfRange { h: f64, low: f64, high: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operation not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("curve grid has {0} points, at least 3 are required")]
    GridTooShort(usize),
    #[error("curves are sampled on different grids")]
    GridMismatch,
    #[error("regressor kind mismatch: {0}")]
    KindMismatch(String),
    #[error("bandwidth component {index} is not positive ({value})")]
    NonpositiveBandwidth { index: usize, value: f64 },
    #[error("no observation receives positive kernel weight at the query point")]
    NoNeighbor,
    #[error("every observation lacks a neighbor at this bandwidth")]
    AllSkipped,
    #[error("pilot density vanishes at observation {0}")]
    ZeroPilotDensity(usize),
    #[error("stratum has {0} observations, at least 2 are required")]
    EmptyStratum(usize),
    #[error("need at least 3 ladder levels with non-empty cuboids, got {0}")]
    InsufficientLevels(usize),
    #[error("kernel does not vanish on the boundary of its support")]
    KernelNotZeroAtBoundary,
    #[error("quadrature dimension {0} exceeds the supported maximum of 3")]
    DimensionTooHigh(usize),
    #[error("cuboid around the query point is empty")]
    EmptyCuboid,
    #[error("inputs must be strictly positive")]
    NonpositiveInput,
    #[error("no treated units in the sample")]
    NoTreatedUnits,
    #[error("treatment arm {0} has no observations")]
    MissingArm(u32),
    #[error("signal has zero standard deviation")]
    DegenerateSignal,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}
