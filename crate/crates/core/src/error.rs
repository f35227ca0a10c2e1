use thiserror::Error;

/// Errors raised while building or binding a model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{name}` has invalid value {value}")]
    InvalidParameter { name: String, value: f64 },
    #[error("invalid prior for `{name}`: {reason}")]
    InvalidPrior { name: String, reason: String },
    #[error("network `{0}` has no fast reactions compatible with the hybrid scheme")]
    UnsupportedHybrid(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
}

/// Errors raised by a single stochastic simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("species {species} exceeded the count limit {limit} at t = {time}")]
    Overflow { species: usize, limit: i64, time: f64 },
    #[error("tau-leap step could not avoid negative counts at t = {time}")]
    StepUnderflow { time: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors from the ABC estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbcError {
    #[error("summary dimension mismatch: simulated {simulated}, observed {observed}")]
    DimensionMismatch { simulated: usize, observed: usize },
    #[error("estimation failed: total weight is zero")]
    ZeroTotalWeight,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Abc(#[from] AbcError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
