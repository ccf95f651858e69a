use thiserror::Error;

pub type Result<T, E = MatchError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// Squared-cycle construction needs at least 5 vertices.
    #[error("degenerate size: n = {n}, need at least {min} (use the brute-force engine for small templates)")]
    DegenerateSize { n: usize, min: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("resource limit exceeded: {what} needs {required} but the limit is {limit}")]
    Resource {
        what: &'static str,
        required: u128,
        limit: u128,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
