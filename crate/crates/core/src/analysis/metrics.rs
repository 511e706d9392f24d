use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::array::ArrayGeometry;
use crate::beam::{BeamPattern, Beamformer, SteeringGrid};

/// Below this a pattern value is treated as zero.
const ZERO_POWER: f64 = 1e-300;

pub const MIN_DIRECTIVITY_POINTS: usize = 90;

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSir {
    /// `P(θ_d) / P(θ_j)` for each interference, linear.
    pub per_interference: Vec<f64>,
    /// Mean of the linear ratios.
    pub mean: f64,
    /// Some interference direction had (numerically) zero power; its ratio
    /// is `+inf`.
    pub saturated: bool,
}

impl OutputSir {
    pub fn per_interference_db(&self) -> Vec<f64> {
        self.per_interference.iter().map(|&x| to_db(x)).collect()
    }

    pub fn mean_db(&self) -> f64 {
        to_db(self.mean)
    }
}

/// Ratio of pattern power towards the desired direction to the power
/// towards each interference, read at the nearest grid points.
pub fn output_sir(p: &BeamPattern, theta_d: f64, thetas_i: &[f64]) -> Result<OutputSir, AnalysisError> {
    if thetas_i.is_empty() {
        return Err(AnalysisError::InvalidInput("no interference directions".into()));
    }
    let pd = p
        .value_at(theta_d)
        .ok_or_else(|| AnalysisError::InvalidInput("empty pattern".into()))?;
    let mut saturated = false;
    let per_interference: Vec<f64> = thetas_i
        .iter()
        .map(|&t| {
            let pi = p.value_at(t).unwrap_or(0.0);
            if pi < ZERO_POWER {
                saturated = true;
                f64::INFINITY
            } else {
                pd / pi
            }
        })
        .collect();
    let mean = per_interference.iter().sum::<f64>() / per_interference.len() as f64;
    Ok(OutputSir {
        per_interference,
        mean,
        saturated,
    })
}

/// Broadside angles in radians spanning `[-90°, 90°]` at `step_deg`.
pub fn full_range_thetas(step_deg: f64) -> Vec<f64> {
    let n = (180.0 / step_deg).round() as usize;
    (0..=n)
        .map(|i| (-90.0 + 180.0 * i as f64 / n as f64).to_radians())
        .collect()
}

/// `P(θ_d) / (½ ∫_0^π P(ψ) sin ψ dψ)` with ψ measured from the array axis.
/// Patterns here are indexed by the broadside angle θ = π/2 − ψ, so the
/// pattern must span `[-π/2, π/2]`; the integral is trapezoidal in θ with
/// weight cos θ.
pub fn directivity(p: &BeamPattern, theta_d: f64) -> Result<f64, AnalysisError> {
    let n = p.len();
    if n < MIN_DIRECTIVITY_POINTS {
        return Err(AnalysisError::GridTooCoarse { points: n });
    }
    let (lo, hi) = (p.thetas[0], p.thetas[n - 1]);
    if lo > -FRAC_PI_2 + 1e-9 || hi < FRAC_PI_2 - 1e-9 {
        return Err(AnalysisError::PatternRangeTooNarrow { min: lo, max: hi });
    }
    let f = |i: usize| p.power[i] * p.thetas[i].cos().max(0.0);
    let integral: f64 = (1..n)
        .map(|i| 0.5 * (f(i) + f(i - 1)) * (p.thetas[i] - p.thetas[i - 1]))
        .sum();
    let pd = p.value_at(theta_d).unwrap_or(0.0);
    Ok(pd / (0.5 * integral))
}

/// Directivity of `bf` re-evaluated on a quarter-degree grid over the full
/// half-plane, independent of the grid the estimate was made on.
pub fn directivity_of(
    bf: &Beamformer,
    geom: &ArrayGeometry,
    wavelength: f64,
    theta_d: f64,
) -> Result<f64, AnalysisError> {
    let grid = SteeringGrid::new(geom, full_range_thetas(0.25), wavelength)?;
    directivity(&bf.evaluate(&grid)?, theta_d)
}

/// One row of a metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenario_id: String,
    pub mean_kind: String,
    pub beamformer: String,
    pub input_sir_db: f64,
    pub output_sir_db: Vec<f64>,
    pub mean_output_sir_db: f64,
    pub directivity: f64,
    pub doa_error_deg: f64,
}
