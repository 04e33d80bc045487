use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("evaluation failed on segment [{a}, {b}]: {message}")]
    Evaluation { a: f64, b: f64, message: String },

    #[error("integration did not converge on [{a}, {b}]")]
    Integration { a: f64, b: f64 },

    #[error("f does not vanish on degenerate segments: |f([{a}, {a}])| = {value:e} exceeds {tol:e}")]
    DiagonalViolation { a: f64, value: f64, tol: f64 },

    #[error("invalid segment [{a}, {b}]")]
    InvalidSegment { a: f64, b: f64 },

    #[error("invalid line configuration: {0}")]
    InvalidConfiguration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not a nice multi-valued function at cell ({i}, {j}): {detail}")]
    NotNice { i: usize, j: usize, detail: String },

    #[error("degeneracy violated at diagonal cell ({i}, {i}, {k}) (y = {y})")]
    Degeneracy { i: usize, k: usize, y: f64 },

    #[error("resolution too coarse at stage {stage}: {detail}; increase grid N, M or the band")]
    ResolutionTooCoarse { stage: usize, detail: String },

    #[error("unsolved: {0}")]
    Unsolved(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
