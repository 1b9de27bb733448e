use std::path::PathBuf;

/// Errors produced by the geometry, hand-model, contact and optimizer layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh is not watertight: {0}")]
    NotWatertight(String),

    #[error("OBJ line {line}: {msg}")]
    Obj { line: usize, msg: String },

    #[error("size mismatch for {what}: expected {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("ray cast from control point {control_point} missed the hand mesh")]
    RayMiss { control_point: usize },

    #[error("non-finite {term} cost at iteration {iteration}")]
    NonFinite { term: &'static str, iteration: usize },

    #[error("unsupported schema `{found}` (expected `{expected}`)")]
    Schema { expected: String, found: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn size(what: &'static str, expected: usize, got: usize) -> Self {
        Error::SizeMismatch { what, expected, got }
    }
}
