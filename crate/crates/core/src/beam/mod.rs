//! Beam patterns, subspace-dimension selection, peak picking and the batch
//! and streaming estimation pipelines.

mod patterns;
mod peaks;
mod pipeline;
mod subspace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::ArrayError;
use crate::hpd::HpdError;
use crate::stft::StftError;

pub use patterns::{
    ds_beam_pattern, intersection_beam_pattern, mvdr_beam_pattern, sbsp_beam_pattern, BeamPattern, Beamformer,
    SteeringGrid,
};
pub use peaks::{pick_peaks, DoaEstimate};
pub use pipeline::{
    build_beamformer, compute_segments, doa_batch, doa_streaming, mean_matrix, BatchOutput, GridSpec, PipelineConfig,
    StreamingDoa,
};
pub use subspace::{estimate_subspace_dim, threshold_count, SubspaceDimRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamformerKind {
    Ds,
    Sbsp,
    Mvdr,
    Intersection,
}

impl BeamformerKind {
    pub const ALL: [BeamformerKind; 4] = [Self::Ds, Self::Sbsp, Self::Mvdr, Self::Intersection];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ds => "ds",
            Self::Sbsp => "sbsp",
            Self::Mvdr => "mvdr",
            Self::Intersection => "intersection",
        }
    }
}

impl std::str::FromStr for BeamformerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ds" => Ok(Self::Ds),
            "sbsp" => Ok(Self::Sbsp),
            "mvdr" => Ok(Self::Mvdr),
            "intersection" => Ok(Self::Intersection),
            other => Err(format!("unknown beamformer '{other}'")),
        }
    }
}

/// Which correlation matrix feeds a beamformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    /// Affine-invariant (Karcher) mean of the segment matrices.
    Riemannian,
    /// Arithmetic mean, identical to one correlation over the whole interval.
    Euclidean,
    LogEuclidean,
    /// A single segment's matrix.
    PerSegment(usize),
}

impl MeanKind {
    pub fn name(&self) -> String {
        match self {
            Self::Riemannian => "riemannian".into(),
            Self::Euclidean => "euclidean".into(),
            Self::LogEuclidean => "logeuclidean".into(),
            Self::PerSegment(i) => format!("segment{i}"),
        }
    }
}

impl std::str::FromStr for MeanKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "riemannian" => Ok(Self::Riemannian),
            "euclidean" => Ok(Self::Euclidean),
            "logeuclidean" | "log_euclidean" | "log-euclidean" => Ok(Self::LogEuclidean),
            _ => lower
                .strip_prefix("segment")
                .and_then(|i| i.parse().ok())
                .map(Self::PerSegment)
                .ok_or_else(|| format!("unknown mean kind '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum BeamError {
    #[error("matrix dimension {found} does not match {expected} microphones")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("subspace dimension {n_d} must lie in 1..{m}")]
    InvalidSubspaceDim { n_d: usize, m: usize },
    #[error("empty direction grid")]
    EmptyGrid,
    #[error("invalid direction grid: {0}")]
    InvalidGrid(String),
    #[error("no segment correlation matrices")]
    NoSegments,
    #[error("segment index {index} out of range ({count} segments)")]
    SegmentOutOfRange { index: usize, count: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hpd(#[from] HpdError),
    #[error(transparent)]
    Stft(#[from] StftError),
    #[error(transparent)]
    Array(#[from] ArrayError),
}
