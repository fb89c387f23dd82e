use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("CFL condition violated: velocity {velocity} m/s gives Courant number {courant} > 1")]
    Cfl { velocity: f64, courant: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("node index {index} outside grid with {nodes} nodes")]
    IndexOutOfGrid { index: usize, nodes: usize },

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("non-finite values encountered in {0}")]
    Divergence(String),

    #[error("dense size guard: N = {size} exceeds limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("singular or indefinite system in {0}")]
    Singular(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// The iterate left the region where the discretization is usable:
    /// non-finite values, a non-positive model, or a CFL violation.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Divergence(_) | Error::Cfl { .. } | Error::InvalidModel(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
