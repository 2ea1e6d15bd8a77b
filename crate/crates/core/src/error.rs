use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("kernel functions are defined for tau >= 0 only (got {0})")]
    NegativeTime(f64),

    #[error("invalid scalar function: {0}")]
    InvalidScalarFn(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid kernel spec: {0}")]
    InvalidSpec(String),

    #[error(
        "loss term sum A^dagger A is not diagonal: entry ({row}, {col}) has magnitude {magnitude:e} at t = {time}"
    )]
    NonDiagonalLossTerm {
        row: usize,
        col: usize,
        magnitude: f64,
        time: f64,
    },

    #[error("negative rate: {what} = {value:e} at t = {time}")]
    NegativeRate { what: String, value: f64, time: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "step guard violated: h * max|K| = {product:e} exceeds {limit} (h = {step}, max|K| = {magnitude:e})"
    )]
    StepGuard {
        step: f64,
        magnitude: f64,
        product: f64,
        limit: f64,
    },

    #[error("kernel is not an exponential sum: {0}")]
    NotExponentialSum(String),

    #[error("polynomial root finding did not converge (degree {0})")]
    RootFinding(usize),

    #[error("kernel samples are fixed to their grid and cannot be refined")]
    NotRefinable,

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("spec has no classical annotation (jump matrix and rates)")]
    MissingClassical,

    #[error("invalid jump matrix: {0}")]
    InvalidJumpMatrix(String),

    #[error("spec is outside the diagonal semi-Markov class: {0}")]
    NotDiagonalClass(String),

    #[error("waiting-time table is classically invalid (density negative at t = {0})")]
    InvalidTable(f64),

    #[error("empty trajectory ensemble")]
    EmptyEnsemble,

    #[error("spec file: {0}")]
    SpecFile(String),
}

pub type Result<V> = std::result::Result<V, Error>;
