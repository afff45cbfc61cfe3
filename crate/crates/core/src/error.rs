use thiserror::Error;

pub type Result<T> = std::result::Result<T, GqrError>;

#[derive(Debug, Error)]
pub enum GqrError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid group partition: {0}")]
    InvalidPartition(String),

    #[error("first design column must be identically 1 (row {row} has {value})")]
    NonUnitIntercept { row: usize, value: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular group Gram block {group} (smallest eigenvalue {min_eig:e})")]
    SingularGram { group: usize, min_eig: f64 },

    #[error("singular β-update system")]
    SingularSystem,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("value {value} outside domain [{lo}, {hi}] for covariate {covariate}")]
    OutOfDomain {
        covariate: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
