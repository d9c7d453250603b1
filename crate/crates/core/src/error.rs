use thiserror::Error;

/// Errors shared across the simulation and verification modules.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Model parameters violate a structural requirement.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A window cannot accommodate the requested offsets or region.
    #[error("window too small: {0}")]
    WindowTooSmall(String),

    /// A point lies outside the realization window.
    #[error("point {point:?} outside window")]
    OutOfWindow { point: Vec<i64> },

    /// A region/density pairing rejected essentially every proposal.
    #[error("rejection sampler exceeded budget: {accepted} accepted in {proposed} proposals")]
    RejectionBudgetExceeded { proposed: u64, accepted: u64 },

    /// Lattice enumeration requested on a continuum-pitch region.
    #[error("region has pitch {pitch}, lattice enumeration requires pitch 1")]
    ContinuumMode { pitch: f64 },

    /// A region contains no lattice sites.
    #[error("region contains no sites")]
    EmptyRegion,

    /// Fewer than two randomizing points were requested.
    #[error("randomizing arrays need at least 2 points, got {0}")]
    TooFewPoints(usize),

    /// The set variance vanishes; the studentized statistic is 0/0.
    #[error("degenerate set variance: {0}")]
    DegenerateVariance(String),

    /// An operation needed exact marginal truth, which the model lacks.
    #[error("model carries no exact marginal truth: {0}")]
    MissingTruth(String),

    /// Sup-statistic requested for an unsupported sample dimension.
    #[error("dimension {0} unsupported for this statistic")]
    DimensionUnsupported(usize),

    /// Vector shapes disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The moment exponent must satisfy 0 < delta <= 1.
    #[error("invalid moment exponent delta = {0}; need 0 < delta <= 1")]
    InvalidDelta(f64),

    /// Rate-curve points sit at the Monte Carlo noise floor.
    #[error("insufficient signal for slope fit: {0}")]
    InsufficientSignal(String),

    /// A scalar-only test received vector samples.
    #[error("statistic produced vector samples; scalar samples required")]
    NonScalarSample,

    /// Too many replications failed inside the replication engine.
    #[error("{failed}/{total} replications failed; first error: {first}")]
    ReplicationsFailed {
        failed: usize,
        total: usize,
        first: String,
    },

    /// A configured quantity failed validation.
    #[error("validation failed: {0}")]
    Validation(String),
}
