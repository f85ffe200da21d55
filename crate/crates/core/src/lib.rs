//! Deep clustering with a circular cluster layout.
//!
//! The pipeline has two halves. GLDC trains an autoencoder plus a softmax
//! clustering head with a combined reconstruction / graph-learning /
//! augmentation loss, producing a per-sample cluster probability matrix.
//! The layout half orders the cluster probability columns on the optimal
//! Hamiltonian cycle of their pairwise dissimilarities, places one anchor
//! per cluster on a circle, and maps each sample to the probability-weighted
//! combination of the anchors. Low-confidence samples end up near the center
//! and are flagged as outliers.

pub mod gldc;
pub mod io;
pub mod layout;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod svg;

pub use matrix::DenseMatrix;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("training diverged: {0}")]
    TrainingDivergence(String),
    #[error("degenerate distances: {0}")]
    DegenerateDistance(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error in {path} at row {row}, column {col}: {message}")]
    Parse {
        path: String,
        row: usize,
        col: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
