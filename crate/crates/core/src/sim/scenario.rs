use serde::{Deserialize, Serialize};

use super::{RoomSpec, SimError};
use crate::array::ArrayGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Desired,
    Interference,
}

/// A point source emitting white Gaussian noise of variance `power`,
/// switched on and off per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub position: [f64; 3],
    pub kind: SourceKind,
    pub power: f64,
    /// One flag per segment; the source is silent in segments marked false.
    pub activation: Vec<bool>,
    /// Shift of the activation schedule, as a fraction of a segment. A
    /// positive offset delays every on/off transition.
    #[serde(default)]
    pub activation_offset: f64,
    /// Random stream used for this source's signal. Defaults to the source
    /// index plus one; stream 0 is the sensor noise.
    #[serde(default)]
    pub stream: Option<u64>,
}

impl SourceSpec {
    pub fn desired(position: [f64; 3], power: f64, segments: usize) -> Self {
        Self {
            position,
            kind: SourceKind::Desired,
            power,
            activation: vec![true; segments],
            activation_offset: 0.0,
            stream: None,
        }
    }

    pub fn interference(position: [f64; 3], power: f64, activation: Vec<bool>) -> Self {
        Self {
            position,
            kind: SourceKind::Interference,
            power,
            activation,
            activation_offset: 0.0,
            stream: None,
        }
    }

    /// Fraction of segments in which the source is active.
    pub fn duty_cycle(&self) -> f64 {
        self.activation.iter().filter(|a| **a).count() as f64 / self.activation.len() as f64
    }

    /// Whether the source emits at sample `n`.
    pub fn is_active_at(&self, n: usize, segment_samples: usize) -> bool {
        let shifted = n as f64 - self.activation_offset * segment_samples as f64;
        let idx = (shifted / segment_samples as f64).floor();
        let idx = idx.clamp(0.0, (self.activation.len() - 1) as f64) as usize;
        self.activation[idx]
    }
}

/// One complete simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub room: RoomSpec,
    pub array: ArrayGeometry,
    pub sources: Vec<SourceSpec>,
    /// Ratio of the first desired source's power to the sensor noise
    /// variance, in dB.
    pub snr_db: f64,
    pub seed: u64,
    /// Samples per activation segment.
    pub segment_samples: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        self.room.validate()?;
        if self.segment_samples == 0 {
            return Err(SimError::Config("segment_samples must be positive".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(SimError::Config(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        if !self.sources.iter().any(|s| s.kind == SourceKind::Desired) {
            return Err(SimError::InvalidSource(
                "at least one desired source is required".into(),
            ));
        }
        let segments = self.segment_count();
        for (i, s) in self.sources.iter().enumerate() {
            if !(s.power.is_finite() && s.power > 0.0) {
                return Err(SimError::InvalidSource(format!("source {i}: power must be positive")));
            }
            if s.activation.is_empty() || s.activation.len() != segments {
                return Err(SimError::InvalidSource(format!(
                    "source {i}: activation has {} entries, expected {segments}",
                    s.activation.len()
                )));
            }
            if s.kind == SourceKind::Desired && !s.activation.iter().all(|a| *a) {
                return Err(SimError::InvalidSource(format!(
                    "source {i}: desired sources must be active in every segment"
                )));
            }
            if !s.activation_offset.is_finite() {
                return Err(SimError::InvalidSource(format!(
                    "source {i}: non-finite activation offset"
                )));
            }
            if !self.room.contains(s.position) {
                return Err(SimError::PositionOutsideRoom(s.position));
            }
        }
        for p in self.array.positions() {
            if !self.room.contains(*p) {
                return Err(SimError::PositionOutsideRoom(*p));
            }
        }
        Ok(())
    }

    /// Number of activation segments, taken from the first source.
    pub fn segment_count(&self) -> usize {
        self.sources.first().map_or(0, |s| s.activation.len())
    }

    /// Samples needed to cover every segment.
    pub fn total_samples(&self) -> usize {
        self.segment_count() * self.segment_samples
    }

    /// Power of the first desired source.
    pub fn reference_power(&self) -> f64 {
        self.sources
            .iter()
            .find(|s| s.kind == SourceKind::Desired)
            .map_or(1.0, |s| s.power)
    }

    /// Sensor noise variance `σ₀² / 10^(SNR/10)`.
    pub fn noise_variance(&self) -> f64 {
        self.reference_power() / 10f64.powf(self.snr_db / 10.0)
    }

    pub fn stream_of(&self, index: usize) -> u64 {
        self.sources[index].stream.unwrap_or(index as u64 + 1)
    }
}
