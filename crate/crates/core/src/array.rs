//! Microphone array geometry, far-field steering vectors and acoustic
//! transfer functions.
//!
//! Angles follow the usual linear-array convention: `θ = 0` is broadside
//! (the +y axis for an array laid along x) and positive angles turn toward
//! +x, so the look direction is `(sin θ, cos θ, 0)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{CVector, Complex64};

/// Speed of sound in air, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ArrayError {
    #[error("an array needs at least two microphones, got {0}")]
    TooFewMicrophones(usize),
    #[error("microphones {0} and {1} share a position")]
    DuplicatePosition(usize, usize),
    #[error("reference index {index} out of range for {count} microphones")]
    InvalidReference { index: usize, count: usize },
    #[error("non-finite microphone coordinate")]
    NonFinitePosition,
    #[error("wavelength must be finite and positive, got {0}")]
    InvalidWavelength(f64),
    #[error("transfer function reference entry is zero")]
    ZeroReferenceEntry,
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("vector length {found} does not match array size {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid array parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct ArrayGeometry {
    positions: Vec<[f64; 3]>,
    reference_index: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    positions: Vec<[f64; 3]>,
    #[serde(default)]
    reference_index: usize,
}

impl TryFrom<RawGeometry> for ArrayGeometry {
    type Error = ArrayError;
    fn try_from(r: RawGeometry) -> Result<Self, ArrayError> {
        Self::new(r.positions, r.reference_index)
    }
}

impl From<ArrayGeometry> for RawGeometry {
    fn from(g: ArrayGeometry) -> Self {
        Self {
            positions: g.positions,
            reference_index: g.reference_index,
        }
    }
}

fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Unit look direction for angle `theta` in the horizontal plane.
pub fn look_direction(theta: f64) -> [f64; 3] {
    [theta.sin(), theta.cos(), 0.0]
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>, reference_index: usize) -> Result<Self, ArrayError> {
        let count = positions.len();
        if count < 2 {
            return Err(ArrayError::TooFewMicrophones(count));
        }
        if reference_index >= count {
            return Err(ArrayError::InvalidReference {
                index: reference_index,
                count,
            });
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ArrayError::NonFinitePosition);
        }
        for i in 0..count {
            for j in i + 1..count {
                if norm(&sub(&positions[i], &positions[j])) < 1e-12 {
                    return Err(ArrayError::DuplicatePosition(i, j));
                }
            }
        }
        Ok(Self {
            positions,
            reference_index,
        })
    }

    /// Uniform linear array starting at `origin` with microphones spaced
    /// `spacing` meters apart along `axis`. The first microphone is the
    /// reference.
    pub fn ula(origin: [f64; 3], spacing: f64, count: usize, axis: [f64; 3]) -> Result<Self, ArrayError> {
        let n = norm(&axis);
        if !(spacing.is_finite() && spacing > 0.0) || !(n.is_finite() && n > 0.0) {
            return Err(ArrayError::InvalidParameter(format!(
                "ULA needs positive spacing and a nonzero axis (spacing {spacing})"
            )));
        }
        let u = [axis[0] / n, axis[1] / n, axis[2] / n];
        let positions = (0..count)
            .map(|m| {
                let s = m as f64 * spacing;
                [origin[0] + s * u[0], origin[1] + s * u[1], origin[2] + s * u[2]]
            })
            .collect();
        Self::new(positions, 0)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn center(&self) -> [f64; 3] {
        let k = self.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for d in 0..3 {
                c[d] += p[d] / k;
            }
        }
        c
    }

    /// Unit axis of the array if all microphones lie on one line.
    pub fn collinear_axis(&self) -> Option<[f64; 3]> {
        let p0 = self.positions[0];
        let far = self
            .positions
            .iter()
            .map(|p| sub(p, &p0))
            .max_by(|a, b| norm(a).total_cmp(&norm(b)))?;
        let n = norm(&far);
        let axis = [far[0] / n, far[1] / n, far[2] / n];
        let aperture = n;
        let collinear = self.positions.iter().all(|p| {
            let d = sub(p, &p0);
            let along = dot(&d, &axis);
            let perp = [d[0] - along * axis[0], d[1] - along * axis[1], d[2] - along * axis[2]];
            norm(&perp) <= 1e-9 * aperture
        });
        collinear.then_some(axis)
    }

    /// Far-field steering vector: entry `m` is `exp(j 2π (p_m − p_ref)·u(θ) / λ)`,
    /// so the reference entry is exactly 1.
    pub fn steering_vector(&self, theta: f64, wavelength: f64) -> Result<SteeringVector, ArrayError> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(ArrayError::InvalidWavelength(wavelength));
        }
        let u = look_direction(theta);
        let p_ref = self.positions[self.reference_index];
        let k = 2.0 * std::f64::consts::PI / wavelength;
        let entries = CVector::from_iterator(
            self.len(),
            self.positions
                .iter()
                .map(|p| Complex64::from_polar(1.0, k * dot(&sub(p, &p_ref), &u))),
        );
        Ok(SteeringVector {
            entries,
            theta,
            wavelength,
        })
    }

    /// Angle under which the array sees a point source at `point`.
    ///
    /// For a linear array only the angle to the array axis is observable, so
    /// the returned θ is the in-plane angle whose look direction makes the
    /// same angle with the axis as the true (possibly elevated) direction,
    /// taking the solution closest to the source azimuth. Other geometries
    /// return the azimuth `atan2(dx, dy)`.
    pub fn direction_of(&self, point: [f64; 3]) -> f64 {
        let v = sub(&point, &self.center());
        let azimuth = v[0].atan2(v[1]);
        let Some(axis) = self.collinear_axis() else {
            return azimuth;
        };
        // a·u(θ) = a_x sin θ + a_y cos θ = R sin(θ + φ).
        let r = axis[0].hypot(axis[1]);
        if r < 1e-12 {
            return azimuth;
        }
        let phi = axis[1].atan2(axis[0]);
        let target = (dot(&axis, &v) / norm(&v) / r).clamp(-1.0, 1.0);
        let base = target.asin();
        let candidates = [base - phi, std::f64::consts::PI - base - phi];
        let wrap = |x: f64| (x + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        candidates
            .into_iter()
            .map(wrap)
            .min_by(|a, b| wrap(a - azimuth).abs().total_cmp(&wrap(b - azimuth).abs()))
            .unwrap_or(azimuth)
    }
}

/// Center frequency of STFT bin `bin` for an `n_fft`-point transform.
pub fn bin_frequency(bin: usize, fs: f64, n_fft: usize) -> f64 {
    bin as f64 * fs / n_fft as f64
}

/// Acoustic wavelength at the center of STFT bin `bin`.
pub fn bin_wavelength(bin: usize, fs: f64, n_fft: usize, speed_of_sound: f64) -> f64 {
    speed_of_sound / bin_frequency(bin, fs, n_fft)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub entries: CVector,
    pub theta: f64,
    pub wavelength: f64,
}

/// Acoustic transfer function from one source to every microphone at one
/// frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Atf(CVector);

impl Atf {
    pub fn new(entries: CVector) -> Result<Self, ArrayError> {
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || entries.norm() == 0.0 {
            return Err(ArrayError::ZeroVector);
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &CVector {
        &self.0
    }

    pub fn into_inner(self) -> CVector {
        self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Relative transfer function with respect to the first microphone.
    pub fn to_rtf(&self) -> Result<Atf, ArrayError> {
        atf_to_rtf(self)
    }
}

pub fn atf_to_rtf(h: &Atf) -> Result<Atf, ArrayError> {
    let r = h.0[0];
    if r.norm() == 0.0 {
        return Err(ArrayError::ZeroReferenceEntry);
    }
    let mut out = h.0.map(|z| z / r);
    out[0] = Complex64::new(1.0, 0.0);
    Ok(Atf(out))
}

/// `|⟨a, b⟩|² / (‖a‖² ‖b‖²)`.
pub fn correlation_coefficient(a: &CVector, b: &CVector) -> Result<f64, ArrayError> {
    if a.len() != b.len() {
        return Err(ArrayError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let (na, nb) = (a.norm_squared(), b.norm_squared());
    if na == 0.0 || nb == 0.0 {
        return Err(ArrayError::ZeroVector);
    }
    Ok((a.dotc(b).norm_sqr() / (na * nb)).min(1.0))
}
