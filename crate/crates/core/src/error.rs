use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("z = {re} + {im}i lies outside the disk B(r, r) with r = {radius}")]
    EvaluationOutsideDisk { re: f64, im: f64, radius: f64 },

    #[error("alpha = {0} outside the admissible range [1/2, 1]")]
    AlphaOutOfRange(f64),

    #[error("coefficient {name} must be strictly positive (found {value})")]
    NonPositiveCoefficient { name: &'static str, value: f64 },

    #[error("Neumann series diverges: contraction ratio {ratio} >= 1{}", cell.map(|c| format!(" at cell {c}")).unwrap_or_default())]
    SeriesDiverges { ratio: f64, cell: Option<usize> },

    #[error("no finite nu satisfies the well-posedness conditions: {0}")]
    NoFiniteNu(String),

    #[error("beta = {0} must be non-negative")]
    BetaNegative(f64),

    #[error("operation requires {expected} boundary conditions")]
    WrongBoundaryCondition { expected: &'static str },

    #[error("frequency system is singular at t = {frequency}")]
    SingularFrequencySystem { frequency: f64 },

    #[error("nu = {nu} is below the certified nu0 = {nu0}")]
    NuBelowNu0 { nu: f64, nu0: f64 },

    #[error("grid of {m} cells is not aligned with {k} periods of the two-phase profile")]
    MisalignedGrid { m: usize, k: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
