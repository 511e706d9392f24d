use serde::{Deserialize, Serialize};

use super::{BeamError, BeamPattern};

/// Estimated directions, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    /// Radians.
    pub directions: Vec<f64>,
    pub peak_powers: Vec<f64>,
    /// Fewer peaks than requested were found.
    pub incomplete: bool,
}

impl DoaEstimate {
    pub fn primary(&self) -> Option<f64> {
        self.directions.first().copied()
    }
}

/// The `n_d` strongest local maxima at least `min_separation` radians
/// apart. Endpoints count as maxima when they exceed their one neighbor;
/// equal powers are ordered by smaller angle first.
pub fn pick_peaks(p: &BeamPattern, n_d: usize, min_separation: f64) -> Result<DoaEstimate, BeamError> {
    let n = p.power.len();
    if n == 0 {
        return Err(BeamError::EmptyGrid);
    }
    if n_d == 0 {
        return Err(BeamError::InvalidConfig("number of peaks must be at least 1".into()));
    }
    let v = &p.power;
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || v[i] > v[i - 1];
            let right = i + 1 == n || v[i] >= v[i + 1];
            left && right
        })
        .collect();
    if maxima.is_empty() {
        // Flat pattern: every point ties, take the first.
        maxima.push(0);
    }
    maxima.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(p.thetas[a].total_cmp(&p.thetas[b])));
    let mut directions: Vec<f64> = Vec::new();
    let mut peak_powers = Vec::new();
    for i in maxima {
        let t = p.thetas[i];
        if directions.iter().all(|d| (d - t).abs() >= min_separation) {
            directions.push(t);
            peak_powers.push(v[i]);
            if directions.len() == n_d {
                break;
            }
        }
    }
    Ok(DoaEstimate {
        incomplete: directions.len() < n_d,
        directions,
        peak_powers,
    })
}
