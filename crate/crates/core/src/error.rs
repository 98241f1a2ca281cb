use thiserror::Error;

/// Errors produced by the estimator, simulator and evaluation code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rotation angle {angle} is too close to pi for a unique logarithm")]
    AngleNearPi { angle: f64 },

    #[error("grid index (time {time}, node {node}) is outside the active window")]
    IndexOutOfWindow { time: usize, node: usize },

    #[error("timestamp {tau} is outside the interval ({start}, {end}]")]
    TimestampOutsideInterval { tau: f64, start: f64, end: f64 },

    #[error("sensor node index {node} is not on the estimation grid of {nodes} nodes")]
    OffGridSensor { node: usize, nodes: usize },

    #[error("noise model is not symmetric positive definite")]
    SingularNoise,

    #[error("normal equations are not positive definite (block {block})")]
    NotPositiveDefinite { block: usize },

    #[error("cost increased from {previous} to {current} after all step halvings")]
    DivergedCost { previous: f64, current: f64 },

    #[error("information block of the marginalized slice is singular")]
    SingularHmm,

    #[error("new timestamp {new} does not follow {last} by one slice period")]
    NonMonotonicTimestamp { last: f64, new: f64 },

    #[error("no joint covariance stored for the interval containing {tau}")]
    MissingJointCovariance { tau: f64 },

    #[error("covariance is singular")]
    SingularCovariance,

    #[error("estimates and ground truth do not overlap in time")]
    EmptyOverlap,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad
    /// input data or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::AngleNearPi { .. }
                | Error::SingularNoise
                | Error::NotPositiveDefinite { .. }
                | Error::DivergedCost { .. }
                | Error::SingularHmm
                | Error::SingularCovariance
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
