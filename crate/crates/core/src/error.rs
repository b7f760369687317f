use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is not on the declared space: {0}")]
    DomainViolation(String),

    #[error("radius mismatch: {0} vs {1}")]
    RadiusMismatch(f64, f64),

    #[error("projective field mismatch")]
    FieldMismatch,

    #[error("finite-difference differential did not stabilise (discrepancy {0:.3e})")]
    DifferentialUnstable(f64),

    #[error("could not build a tangent frame: {0}")]
    FrameConstruction(String),

    #[error("perturbation amplitude too large: {0}")]
    AmplitudeTooLarge(f64),

    #[error("operation not supported for this map: {0}")]
    Unsupported(String),

    #[error("value is not regular: smallest singular value {0:.3e}")]
    RankDeficient(f64),

    #[error("no preimage found for the requested value")]
    NoPreimage,

    #[error("corrector stalled (residual {0:.3e})")]
    StepCollapse(f64),

    #[error("fiber did not close after {0} continuation steps")]
    Unclosed(usize),

    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("curves too close: minimum distance {0:.3e}")]
    CurvesTooClose(f64),

    #[error("no stereographic pole far enough from both curves")]
    PoleSearchFailed,

    #[error("no generic projection direction found after {0} attempts")]
    NoGenericProjection(usize),

    #[error("linking oracles disagree: gauss {gauss:.4} (rounded {rounded}) vs crossings {crossings}")]
    OracleDisagreement { gauss: f64, rounded: i64, crossings: i64 },

    #[error("linking integral gap {0:.3e} stayed above threshold after refinement")]
    LinkingGap(f64),

    #[error("malformed curve: {0}")]
    MalformedCurve(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
