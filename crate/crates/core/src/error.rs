use thiserror::Error;

/// Errors raised by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("structure invariant violated: {0}")]
    Structure(String),

    #[error("Hörmander condition fails: bracket rank {rank} < center dimension {center}")]
    Hormander { rank: usize, center: usize },

    #[error("truncation: max rank {max_rank} is below weighted degree {degree}")]
    Truncation { max_rank: usize, degree: usize },

    #[error("derivative word of length {0} exceeds the supported maximum of 8")]
    WordTooLong(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
