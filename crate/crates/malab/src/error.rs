use thiserror::Error;

pub type Result<T> = std::result::Result<T, MalabError>;

#[derive(Debug, Error)]
pub enum MalabError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("value count {found} does not match grid size {expected}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("MAGF1 parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("node {node} is not an in-domain node")]
    NotInDomain { node: usize },

    #[error("node {node} is not an interior node")]
    NotInterior { node: usize },

    #[error("slope is not a subgradient at node {node} (defect {defect:e})")]
    NotSubgradient { node: usize, defect: f64 },

    #[error("height must be positive, got {0}")]
    NonPositiveHeight(f64),

    #[error("section at node {node} with height {h} is not compactly contained")]
    NotCompact { node: usize, h: f64 },

    #[error("degenerate point set: {0}")]
    Degenerate(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("indefinite Hessian at {point:?}: min eigenvalue {min_eig:e}")]
    Indefinite { point: [f64; 3], min_eig: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
