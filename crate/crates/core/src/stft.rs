//! Single-bin STFT analysis and per-segment sample correlation matrices.

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hpd::{HpdError, HpdMatrix};
use crate::{CMatrix, CVector, Complex64};

#[derive(Debug, Clone, Error)]
pub enum StftError {
    #[error("bin {bin} out of range for a {window}-point transform")]
    BinOutOfRange { bin: usize, window: usize },
    #[error("signal of {len} samples is shorter than one {window}-sample window")]
    SignalTooShort { len: usize, window: usize },
    #[error("channels have different lengths")]
    ChannelMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("segment length {l_w} is smaller than the {channels} channels")]
    SegmentTooShort { l_w: usize, channels: usize },
    #[error("not enough frames for a single segment ({frames} < {l_w})")]
    NoFullSegment { frames: usize, l_w: usize },
    #[error(transparent)]
    Hpd(#[from] HpdError),
}

/// Periodic Hann window, `0.5 (1 − cos(2π n / N))`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// STFT coefficients of every channel at one frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct StftFrames {
    /// `L × M`: row `l` is the snapshot `z(l, k)`.
    pub frames: CMatrix,
    pub bin: usize,
    pub window_size: usize,
    pub hop: usize,
}

impl StftFrames {
    pub fn frame_count(&self) -> usize {
        self.frames.nrows()
    }

    pub fn channel_count(&self) -> usize {
        self.frames.ncols()
    }

    /// Snapshot vector of frame `l`.
    pub fn snapshot(&self, l: usize) -> CVector {
        self.frames.row(l).transpose()
    }
}

fn check_channels(channels: &[Vec<f64>], window: usize) -> Result<usize, StftError> {
    let len = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != len) {
        return Err(StftError::ChannelMismatch);
    }
    if len < window {
        return Err(StftError::SignalTooShort { len, window });
    }
    Ok(len)
}

/// Hann-windowed DFT coefficient `bin` of each channel, for frames starting
/// every `hop` samples. Incomplete trailing frames are skipped.
pub fn stft_bin(channels: &[Vec<f64>], window_size: usize, hop: usize, bin: usize) -> Result<StftFrames, StftError> {
    if window_size == 0 || hop == 0 {
        return Err(StftError::InvalidParameter(
            "window size and hop must be positive".into(),
        ));
    }
    if bin > window_size / 2 {
        return Err(StftError::BinOutOfRange {
            bin,
            window: window_size,
        });
    }
    if channels.is_empty() {
        return Err(StftError::InvalidParameter("no channels".into()));
    }
    let len = check_channels(channels, window_size)?;
    let frames = (len - window_size) / hop + 1;
    let w = hann(window_size);
    let kernel: Vec<Complex64> = (0..window_size)
        .map(|n| {
            let phase = -2.0 * std::f64::consts::PI * ((bin * n) % window_size) as f64 / window_size as f64;
            Complex64::from_polar(w[n], phase)
        })
        .collect();
    let columns: Vec<Vec<Complex64>> = channels
        .par_iter()
        .map(|x| {
            (0..frames)
                .map(|l| {
                    let seg = &x[l * hop..l * hop + window_size];
                    seg.iter().zip(&kernel).map(|(v, k)| k * *v).sum()
                })
                .collect()
        })
        .collect();
    let out = CMatrix::from_fn(frames, channels.len(), |l, m| columns[m][l]);
    Ok(StftFrames {
        frames: out,
        bin,
        window_size,
        hop,
    })
}

/// Full Hann-windowed spectrum of one frame of one channel.
pub fn frame_spectrum(x: &[f64], start: usize, window_size: usize) -> Result<Vec<Complex64>, StftError> {
    if start + window_size > x.len() {
        return Err(StftError::SignalTooShort {
            len: x.len().saturating_sub(start),
            window: window_size,
        });
    }
    let w = hann(window_size);
    let mut buf: Vec<Complex64> = x[start..start + window_size]
        .iter()
        .zip(&w)
        .map(|(v, w)| Complex64::new(v * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(window_size).process(&mut buf);
    Ok(buf)
}

/// Diagonal loading added to each sample correlation matrix before it is
/// validated as positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum DiagonalLoading {
    None,
    Absolute(f64),
    /// `c · tr(Γ) / M`.
    TraceRelative(f64),
}

impl Default for DiagonalLoading {
    fn default() -> Self {
        DiagonalLoading::TraceRelative(1e-10)
    }
}

impl DiagonalLoading {
    pub fn amount(&self, m: &CMatrix) -> f64 {
        match *self {
            DiagonalLoading::None => 0.0,
            DiagonalLoading::Absolute(a) => a,
            DiagonalLoading::TraceRelative(c) => {
                let tr: f64 = m.diagonal().iter().map(|z| z.re).sum();
                c * tr / m.nrows() as f64
            }
        }
    }

    pub fn apply(&self, m: CMatrix) -> Result<HpdMatrix, HpdError> {
        let a = self.amount(&m);
        HpdMatrix::with_loading(m, a)
    }
}

/// Per-segment sample correlation matrices in segment order.
#[derive(Debug, Clone)]
pub struct SegmentedCorrelations {
    pub matrices: Vec<HpdMatrix>,
    pub segment_length: usize,
}

impl SegmentedCorrelations {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Frame range covered by segment `i`.
    pub fn frame_range(&self, i: usize) -> std::ops::Range<usize> {
        i * self.segment_length..(i + 1) * self.segment_length
    }
}

/// `(1/n) Σ z zᴴ` over frames `range`.
pub fn sample_correlation(f: &StftFrames, range: std::ops::Range<usize>) -> CMatrix {
    let block = f.frames.rows(range.start, range.len());
    let n = range.len() as f64;
    // Rows are zᵀ, so Σ z zᴴ = (Zᵀ)(Zᵀ)ᴴ with Zᵀ = blockᵀ.
    let zt = block.transpose();
    let m = &zt * zt.adjoint();
    crate::hpd::hermitian_part(&m.unscale(n))
}

/// Sample correlation over each run of `l_w` consecutive frames; a trailing
/// partial segment is dropped.
pub fn segment_correlations(
    f: &StftFrames,
    l_w: usize,
    loading: DiagonalLoading,
) -> Result<SegmentedCorrelations, StftError> {
    let m = f.channel_count();
    if l_w < m {
        return Err(StftError::SegmentTooShort { l_w, channels: m });
    }
    let count = f.frame_count() / l_w;
    if count == 0 {
        return Err(StftError::NoFullSegment {
            frames: f.frame_count(),
            l_w,
        });
    }
    let matrices = (0..count)
        .into_par_iter()
        .map(|i| loading.apply(sample_correlation(f, i * l_w..(i + 1) * l_w)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SegmentedCorrelations {
        matrices,
        segment_length: l_w,
    })
}

/// Sample correlation over the first `frames` frames taken as one block.
pub fn interval_correlation(f: &StftFrames, frames: usize, loading: DiagonalLoading) -> Result<HpdMatrix, StftError> {
    if frames == 0 || frames > f.frame_count() {
        return Err(StftError::InvalidParameter(format!(
            "interval of {frames} frames out of {}",
            f.frame_count()
        )));
    }
    Ok(loading.apply(sample_correlation(f, 0..frames))?)
}
