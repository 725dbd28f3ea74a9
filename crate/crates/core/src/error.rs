use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site {0:?} lies outside the box")]
    OutsideBox(Vec<i32>),

    #[error("cylinder contains no lattice points")]
    EmptyCylinder,

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("quantile level {0} outside [0, 1)")]
    QuantileLevel(f64),

    #[error("invalid law: {0}")]
    InvalidLaw(String),

    #[error("laws are not stochastically ordered: {0}")]
    NotOrdered(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("set is not connected")]
    Disconnected,

    #[error("query unanswerable at this box size: {0}")]
    Unanswerable(String),

    #[error("snapshot is clipped by the box frame: {0}")]
    Clipped(String),

    #[error("not enough usable points: need {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },

    #[error("all replicas were discarded")]
    NoReplicas,

    #[error("insufficient survivors: kept {kept}, discarded {discarded}")]
    InsufficientSurvivors { kept: usize, discarded: usize },

    #[error("io: {0}")]
    Io(String),

    #[error("config: {0}")]
    Config(String),
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

pub type Result<T> = std::result::Result<T, Error>;
