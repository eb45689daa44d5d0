use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("metric sample at column {column}, x2 = {x2} left its Taylor envelope [{lower}, {upper}] (f = {value})")]
    EnvelopeViolation {
        column: usize,
        x2: f64,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("non-positive metric factor f = {value} at (x1, x2) = ({x1}, {x2})")]
    NonPositiveMetric { x1: f64, x2: f64, value: f64 },

    #[error("singular mass matrix: retained node {node} has lumped mass {mass}")]
    SingularMass { node: usize, mass: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },

    #[error("shift {shift} is not below the spectrum (pivot {pivot} = {value:e})")]
    ShiftInsideSpectrum { shift: f64, pivot: usize, value: f64 },

    #[error("truncation too small: boundary harmonic value {boundary_value} below 10x requested range {range}")]
    TruncationWarning { boundary_value: f64, range: f64 },

    #[error("grid has no node at y1 = 0")]
    GridMisaligned,

    #[error("Hardy hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("initial datum not in the Gaussian-weighted space (alpha = {alpha} <= 1/2)")]
    NotInWeightedSpace { alpha: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("degenerate fit: {samples} samples in window, need at least {required}")]
    DegenerateFit { samples: usize, required: usize },

    #[error("start point ({x1}, {x2}) is not strictly inside the strip")]
    BadStart { x1: f64, x2: f64 },

    #[error("time step {dt} exceeds a^2/100 = {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("no checkpoint recorded at t = {0}")]
    CheckpointMissing(f64),

    #[error("insufficient signal: {0}")]
    InsufficientSignal(String),

    #[error("too few survivors at t = {t}: {alive} < {required}")]
    TooFewSurvivors { t: f64, alive: usize, required: usize },

    #[error("series tail bound {bound:e} exceeds tolerance {tolerance:e}")]
    TailTooLarge { bound: f64, tolerance: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
