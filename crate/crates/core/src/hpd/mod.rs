//! Geometry on the manifold of Hermitian positive-definite matrices.
//!
//! Three geometries are available: affine-invariant (Karcher mean),
//! Log-Euclidean and plain Euclidean. All functions are pure; the streaming
//! trackers own their state.

mod geometry;
mod matrix;
mod means;
pub mod random;
mod streaming;

use thiserror::Error;

pub use geometry::{affine_invariant_distance, exp_map, geodesic_point, log_euclidean_distance, log_map, Whitener};
pub use matrix::{
    hermitian_defect, hermitian_part, HermitianEigen, HermitianMatrix, HpdMatrix, MatrixRecord, TangentMatrix,
    HERMITIAN_TOLERANCE,
};
pub use means::{
    commuting_mean, euclidean_mean, karcher_mean, log_euclidean_mean, KarcherMean, MeanConfig, StopCriterion,
    COMMUTATOR_TOLERANCE,
};
pub use streaming::{
    streaming_euclidean_update, streaming_riemannian_update, EuclideanMeanTracker, RiemannianMeanTracker,
};

#[derive(Debug, Clone, Error)]
pub enum HpdError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has a non-finite entry")]
    NonFiniteEntry,
    #[error("matrix is not Hermitian (relative defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("eigendecomposition produced non-finite values")]
    NonFiniteEigenvalue,
    #[error("malformed matrix record: dim {dim}, {re} real and {im} imaginary entries")]
    MalformedRecord { dim: usize, re: usize, im: usize },
    #[error("diagonal loading must be finite and nonnegative, got {0}")]
    InvalidLoading(f64),
    #[error("scale factor must be finite and positive, got {0}")]
    InvalidScale(f64),
    #[error("empty input")]
    EmptyInput,
    #[error("Karcher iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Box<HpdMatrix>,
    },
    #[error("matrices do not commute (relative commutator {residual:e})")]
    NotCommuting { residual: f64 },
    #[error("streaming index must be at least 1, got {0}")]
    InvalidIndex(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
