use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field has {got} nodes but the grid has {expected}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value at node {node}, time level {level}")]
    NonFiniteState { node: usize, level: usize },

    #[error("semi-smooth Newton hit the iteration cap ({iterations}) with residual {residual:e}")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("time level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("explicit step dt = {dt:e} exceeds the stability limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("test function support {support:?} is not strictly inside {domain:?}")]
    SupportViolation { support: [f64; 4], domain: [f64; 4] },

    #[error("time {t} outside [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },

    #[error(
        "solution left the a-priori band [{lo}, {hi}]: value {value} at node {node}, level {level}"
    )]
    BoundViolation {
        lo: f64,
        hi: f64,
        value: f64,
        node: usize,
        level: usize,
    },

    #[error("runs are not comparable: {0}")]
    Incompatible(String),

    #[error("no moving front: the level set never crosses the interior")]
    StationaryFront,

    #[error("bisection bracket [{lo}, {hi}] does not enclose a root")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("solve failed at epsilon = {epsilon:e}: {source}")]
    Sweep {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
