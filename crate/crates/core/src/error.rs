use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("gamma must lie in (0, 2), got {0}")]
    OutOfRangeGamma(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("time grid has no steps")]
    EmptyGrid,
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("coincident points: covariance diverges")]
    CoincidentPoints,
    #[error("epsilon {epsilon} is not a positive multiple of dt {dt}")]
    EpsilonGridMismatch { epsilon: f64, dt: f64 },
    #[error("region [{t_min}, {t_max}] outside grid span [0, {t_end}]")]
    RegionOutsideGrid { t_min: f64, t_max: f64, t_end: f64 },
    #[error("region endpoint {0} does not fall on a grid node")]
    RegionNotAligned(f64),
    #[error("region has zero area")]
    EmptyRegion,
    #[error("grids at the two scales are incompatible: {0}")]
    IncompatibleGrids(String),
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("tail bound {bound:e} exceeds tolerance {tol:e} with {n_modes} modes")]
    TailTolNotMet { bound: f64, tol: f64, n_modes: usize },
    #[error("grid span {grid_end} does not cover requested time {needed}")]
    GridSpanMismatch { grid_end: f64, needed: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("covariance signal lost at separation {0}")]
    SignalLost(f64),
    #[error("window [{t1}, {t2}] outside cylinder [-{t_half}, {t_half}]")]
    WindowOutsideCylinder { t1: f64, t2: f64, t_half: f64 },
    #[error("insertions not admissible: max |alpha| = {max_alpha} >= Q = {q}")]
    InadmissibleInsertions { max_alpha: f64, q: f64 },
    #[error("alpha {alpha} not admissible (Q = {q})")]
    InadmissibleAlpha { alpha: f64, q: f64 },
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("fingerprint mismatch: {0} vs {1}")]
    FingerprintMismatch(String, String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
