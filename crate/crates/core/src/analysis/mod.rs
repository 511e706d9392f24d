//! Output SIR and directivity of beam patterns, plus the closed-form model of
//! segment means under orthogonal transfer functions.

mod analytic;
mod metrics;

use thiserror::Error;

use crate::beam::BeamError;
use crate::hpd::HpdError;

pub use analytic::{
    analytic_mean_matrix, analytic_sir, analytic_total_sir, construct_vectors, misalignment_matrices,
    misalignment_mu_sq, mu_euclidean, mu_riemannian, orthogonal_ula_directions, population_segment_matrices,
    quadratic_sir, sir_bar, AnalyticModel, Construction, InterferenceParams, ModelAtfs, MuRule,
    ORTHOGONALITY_TOLERANCE,
};
pub use metrics::{
    directivity, directivity_of, full_range_thetas, output_sir, to_db, MetricReport, OutputSir, MIN_DIRECTIVITY_POINTS,
};

#[derive(Debug, Clone, Error)]
pub enum AnalysisError {
    #[error("transfer functions {a} and {b} are not orthogonal (|<a,b>| = {inner:e})")]
    AtfsNotOrthogonal { a: usize, b: usize, inner: f64 },
    #[error("expected {expected} interferences, found {found}")]
    WrongInterferenceCount { expected: usize, found: usize },
    #[error("vector length {found} does not match {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("pattern has {points} points, at least {MIN_DIRECTIVITY_POINTS} are needed")]
    GridTooCoarse { points: usize },
    #[error("pattern spans [{min:.4}, {max:.4}] rad but must cover [-pi/2, pi/2]")]
    PatternRangeTooNarrow { min: f64, max: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Hpd(#[from] HpdError),
}
