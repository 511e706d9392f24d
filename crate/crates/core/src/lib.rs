//! Direction-of-arrival estimation in the presence of intermittent
//! interference, built on the Riemannian geometry of Hermitian
//! positive-definite (HPD) spatial correlation matrices.
//!
//! The crate is organised bottom-up:
//!
//! - [`hpd`]: HPD matrices, affine-invariant and Log-Euclidean geometry,
//!   batch and streaming means.
//! - [`array`]: array geometry, steering vectors and transfer functions.
//! - [`sim`]: shoebox image-source room simulation and multichannel rendering.
//! - [`stft`]: single-bin STFT analysis and per-segment correlation matrices.
//! - [`beam`]: DS / subspace / MVDR / intersection beam patterns, peak picking
//!   and the batch and streaming estimation pipelines.
//! - [`analysis`]: output SIR, directivity and the closed-form model of the
//!   segment means used to check the numerical pipeline.
//! - [`experiment`]: Monte-Carlo scenario generation and aggregation.

pub mod analysis;
pub mod array;
pub mod beam;
pub mod experiment;
pub mod hpd;
pub mod sim;
pub mod stft;
pub mod verify;

pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<Complex64>;
