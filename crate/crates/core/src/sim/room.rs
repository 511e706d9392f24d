//! Shoebox image-source room impulse responses.

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::array::SPEED_OF_SOUND;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Room size in meters along x, y, z.
    pub dimensions: [f64; 3],
    /// Reverberation time in seconds; 0 gives a free-field direct path.
    pub t60: f64,
    /// Impulse response length in samples.
    pub air_length: usize,
    /// Sampling rate in Hz.
    pub fs: f64,
}

impl Default for RoomSpec {
    fn default() -> Self {
        Self {
            dimensions: [5.0, 4.0, 3.5],
            t60: 0.15,
            air_length: 2048,
            fs: 16_000.0,
        }
    }
}

/// Half-width of the windowed-sinc fractional-delay kernel (8 taps total).
const SINC_HALF_WIDTH: i64 = 4;

impl RoomSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.dimensions.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(SimError::InvalidRoom(format!(
                "dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        if !(self.t60.is_finite() && self.t60 >= 0.0) {
            return Err(SimError::InvalidRoom(format!("t60 must be >= 0, got {}", self.t60)));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) || self.air_length == 0 {
            return Err(SimError::InvalidRoom(format!(
                "need fs > 0 and air_length >= 1, got {} / {}",
                self.fs, self.air_length
            )));
        }
        Ok(())
    }

    /// Uniform wall reflection coefficient from Sabine's formula
    /// `T60 = 0.161 V / (S α)`, with amplitude coefficient `β = sqrt(1 − α)`.
    pub fn reflection_coefficient(&self) -> f64 {
        if self.t60 == 0.0 {
            return 0.0;
        }
        let [lx, ly, lz] = self.dimensions;
        let volume = lx * ly * lz;
        let surface = 2.0 * (lx * ly + lx * lz + ly * lz);
        let alpha = 0.161 * volume / (surface * self.t60);
        if alpha >= 1.0 {
            0.0
        } else {
            (1.0 - alpha).sqrt()
        }
    }

    /// Largest image order per axis.
    pub fn max_order(&self) -> i64 {
        if self.reflection_coefficient() == 0.0 {
            return 0;
        }
        let min_dim = self.dimensions.iter().cloned().fold(f64::INFINITY, f64::min);
        (self.t60 * SPEED_OF_SOUND / min_dim).ceil() as i64 + 3
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter()
            .zip(&self.dimensions)
            .all(|(x, l)| x.is_finite() && *x > 0.0 && x < l)
    }
}

/// Image coordinates along one axis with their wall-hit counts:
/// `x = (1 − 2q) s + 2 m L` reflects `|m − q| + |m|` times.
fn axis_images(s: f64, l: f64, order: i64) -> Vec<(f64, i32)> {
    let mut out = Vec::with_capacity(2 * (2 * order as usize + 1));
    for m in -order..=order {
        for q in 0..=1i64 {
            let x = (1 - 2 * q) as f64 * s + 2.0 * m as f64 * l;
            let hits = ((m - q).abs() + m.abs()) as i32;
            out.push((x, hits));
        }
    }
    out
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Acoustic impulse response from `src` to `mic` by the image method.
///
/// Each image contributes `β^hits / (4π d)` at delay `d / c`, placed with
/// an 8-tap Hann-windowed sinc. Images arriving after the response length
/// are dropped.
pub fn image_source_air(room: &RoomSpec, src: [f64; 3], mic: [f64; 3]) -> Result<Vec<f64>, SimError> {
    room.validate()?;
    for p in [src, mic] {
        if !room.contains(p) {
            return Err(SimError::PositionOutsideRoom(p));
        }
    }
    let beta = room.reflection_coefficient();
    let order = room.max_order();
    let len = room.air_length;
    let mut h = vec![0.0; len];
    let max_dist = (len as f64 + SINC_HALF_WIDTH as f64) * SPEED_OF_SOUND / room.fs;
    let samples_per_meter = room.fs / SPEED_OF_SOUND;

    let ax: Vec<_> = (0..3).map(|d| axis_images(src[d], room.dimensions[d], order)).collect();
    for &(x, hx) in &ax[0] {
        let dx2 = (x - mic[0]).powi(2);
        if dx2 > max_dist * max_dist {
            continue;
        }
        for &(y, hy) in &ax[1] {
            let dxy2 = dx2 + (y - mic[1]).powi(2);
            if dxy2 > max_dist * max_dist {
                continue;
            }
            for &(z, hz) in &ax[2] {
                let d = (dxy2 + (z - mic[2]).powi(2)).sqrt();
                if d > max_dist {
                    continue;
                }
                let hits = hx + hy + hz;
                let gain = if hits == 0 { 1.0 } else { beta.powi(hits) };
                if gain == 0.0 {
                    continue;
                }
                let amp = gain / (4.0 * std::f64::consts::PI * d);
                let t = d * samples_per_meter;
                let base = t.floor() as i64;
                for n in base - SINC_HALF_WIDTH + 1..=base + SINC_HALF_WIDTH {
                    if n < 0 || n >= len as i64 {
                        continue;
                    }
                    let x = n as f64 - t;
                    let w = 0.5 * (1.0 + (std::f64::consts::PI * x / SINC_HALF_WIDTH as f64).cos());
                    h[n as usize] += amp * w * sinc(x);
                }
            }
        }
    }
    Ok(h)
}
