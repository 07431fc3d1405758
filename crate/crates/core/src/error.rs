use thiserror::Error;

/// Errors produced by graph construction, noise sampling, propagation and the
/// experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph needs at least {min} nodes, got {got}")]
    GraphTooSmall { min: usize, got: usize },

    #[error("node index {node} out of range for graph with {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },

    #[error("self-loop at node {0} is not allowed")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("edge list parse error at line {line}: {msg}")]
    EdgeListParse { line: usize, msg: String },

    #[error("invalid parameter {name}: {msg}")]
    InvalidParam { name: &'static str, msg: String },

    #[error("expected {expected} noise source values, got {got}")]
    SourceCountMismatch { expected: usize, got: usize },

    #[error("state is not normalized (norm {norm})")]
    UnnormalizedState { norm: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("sample times must be finite, non-negative and non-decreasing")]
    BadSampleTimes,

    #[error("bessel tail mass beyond the lattice edge exceeds 1e-12 at t = {t}")]
    BesselTailTooWide { t: f64 },

    #[error("projection onto the {0} sector has zero norm")]
    ZeroNormProjection(&'static str),

    #[error("fit needs at least {min} positive points, got {got}")]
    FitInsufficientData { min: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
