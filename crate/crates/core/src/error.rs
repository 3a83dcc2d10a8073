use thiserror::Error;

/// Errors raised by the numerical routines and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid refinement exponent {0} outside 3..=24")]
    GridExponent(u32),

    #[error("density evaluation produced a non-finite value at node {node}")]
    NodeEvaluation { node: usize },

    #[error("values length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("max lag {lag} too large for grid of {grid} nodes (aliasing guard)")]
    Aliasing { lag: usize, grid: usize },

    #[error("probe needs at least 4 consecutive exponents, got {0}")]
    ProbeWindow(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("branch point z = -1 of (1+z)^(1/2) is excluded")]
    BranchPoint,

    #[error("point {0} lies outside the closed unit disk")]
    OutsideDisk(f64),

    #[error("not factorizable: {0}")]
    NotFactorizable(String),

    #[error("order {0} must be a power of two")]
    OrderNotPowerOfTwo(usize),

    #[error("autocovariance lag {requested} unavailable (max lag {available})")]
    InsufficientLags { requested: usize, available: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("empty index set")]
    EmptyIndexSet,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable code for reports and CLI errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::GridExponent(_) => "GRID_EXPONENT",
            Error::NodeEvaluation { .. } => "NODE_EVALUATION",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::Aliasing { .. } => "ALIASING",
            Error::ProbeWindow(_) => "PROBE_WINDOW",
            Error::InvalidModel(_) => "INVALID_MODEL",
            Error::BranchPoint => "BRANCH_POINT",
            Error::OutsideDisk(_) => "OUTSIDE_DISK",
            Error::NotFactorizable(_) => "NOT_FACTORIZABLE",
            Error::OrderNotPowerOfTwo(_) => "ORDER_NOT_POWER_OF_TWO",
            Error::InsufficientLags { .. } => "INSUFFICIENT_LAGS",
            Error::Singular(_) => "SINGULAR",
            Error::EmptyIndexSet => "EMPTY_INDEX_SET",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::Config(_) => "CONFIG",
            Error::Io(_) => "IO",
            Error::Json(_) => "JSON",
            Error::Csv(_) => "CSV",
        }
    }
}
