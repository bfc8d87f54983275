use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape mismatch: expected {expected} components, got {got}")]
    InputShape { expected: usize, got: usize },

    #[error("non-finite value encountered in layer {layer}")]
    NonFinite { layer: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("point lies outside the input bounds")]
    OutOfBounds,

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    TrainingDiverged { epoch: usize },

    #[error("batch normalization needs at least 2 samples per batch, got {0}")]
    DegenerateBatch(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("LP solver failed: {0}")]
    SolverFailure(String),

    #[error("LP solver failed on constraint {index}: {source}")]
    ConstraintSolve {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("region is infeasible")]
    InfeasibleRegion,

    #[error("could not sample a null-space direction after {0} attempts")]
    NullSpaceCollapse(usize),

    #[error("non-finite arithmetic: {0}")]
    Numeric(String),

    #[error("empty class {0}")]
    EmptyClass(usize),

    #[error("unsupported render style: {0}")]
    UnsupportedStyle(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
