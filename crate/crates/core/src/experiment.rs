//! Monte-Carlo scenarios in a reverberant shoebox room: sources on an arc
//! around a linear array, intermittent interferences, and per-trial metrics
//! for every (mean, beamformer) pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{directivity_of, output_sir, to_db, AnalysisError, MetricReport};
use crate::array::{ArrayError, ArrayGeometry};
use crate::beam::{
    build_beamformer, compute_segments, mean_matrix, pick_peaks, BeamError, BeamformerKind, MeanKind, PipelineConfig,
    SubspaceDimRule,
};
use crate::sim::{render_signals, RoomSpec, Scenario, SimError, SourceSpec};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Array(#[from] ArrayError),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// How interferences are switched on across segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationPattern {
    /// Interference `j` is active only in segment `j mod segments`.
    Alternating,
    /// Each interference is active in each segment independently with
    /// probability `p`.
    Bernoulli { p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub room: RoomSpec,
    /// Position of the first microphone.
    pub array_origin: [f64; 3],
    pub mic_spacing: f64,
    pub mic_count: usize,
    /// Sources sit on a horizontal arc of this radius around the array center.
    pub arc_radius: f64,
    /// Broadside angles are drawn uniformly from ±half this span.
    pub arc_span_deg: f64,
    /// Smallest angular gap between any two sources on the arc.
    pub min_source_gap_deg: f64,
    pub desired_height: f64,
    /// Interference heights are drawn uniformly from this range.
    pub interference_height: [f64; 2],
    pub interferences: usize,
    pub segments: usize,
    /// Samples per activation segment.
    pub segment_samples: usize,
    pub activation: ActivationPattern,
    /// `10 log10(σ₀² / σ_j²)` on emitted powers, the same for every interference.
    pub input_sir_db: f64,
    /// Emitted desired power over sensor-noise variance, in dB.
    pub snr_db: f64,
    pub pipeline: PipelineConfig,
    pub beamformers: Vec<BeamformerKind>,
    pub means: Vec<MeanKind>,
    pub monte_carlo: usize,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self::two_interferences()
    }
}

impl ExperimentSpec {
    /// Two interferences, each active in one of two 1.024 s segments.
    pub fn two_interferences() -> Self {
        Self {
            room: RoomSpec::default(),
            array_origin: [2.0436, 1.0, 2.0],
            mic_spacing: 0.0436,
            mic_count: 12,
            arc_radius: 2.0,
            arc_span_deg: 140.0,
            min_source_gap_deg: 10.0,
            desired_height: 1.8,
            interference_height: [0.5, 3.0],
            interferences: 2,
            segments: 2,
            segment_samples: 16_384,
            activation: ActivationPattern::Alternating,
            input_sir_db: -6.0,
            snr_db: 50.0,
            pipeline: PipelineConfig::default(),
            beamformers: vec![BeamformerKind::Ds, BeamformerKind::Sbsp],
            means: vec![MeanKind::Riemannian, MeanKind::Euclidean],
            monte_carlo: 20,
            seed: 1,
        }
    }

    /// Fourteen interferences over ten segments, each active with probability 0.3.
    pub fn many_interferences() -> Self {
        Self {
            interferences: 14,
            segments: 10,
            activation: ActivationPattern::Bernoulli { p: 0.3 },
            min_source_gap_deg: 4.0,
            monte_carlo: 10,
            ..Self::two_interferences()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.segments == 0 || self.segment_samples == 0 {
            return bad("segments and segment_samples must be positive".into());
        }
        if self.monte_carlo == 0 {
            return bad("monte_carlo must be at least 1".into());
        }
        if self.beamformers.is_empty() || self.means.is_empty() {
            return bad("at least one beamformer and one mean are required".into());
        }
        if let ActivationPattern::Bernoulli { p } = self.activation {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("activation probability {p}"));
            }
        }
        let [lo, hi] = self.interference_height;
        if !(lo <= hi) {
            return bad(format!("interference height range [{lo}, {hi}]"));
        }
        let slots = self.arc_span_deg / self.min_source_gap_deg.max(1e-9);
        if slots < (self.interferences + 1) as f64 {
            return bad(format!(
                "{} sources do not fit {}° apart on a {}° arc",
                self.interferences + 1,
                self.min_source_gap_deg,
                self.arc_span_deg
            ));
        }
        if self.pipeline.segment_frames * self.pipeline.hop > self.segment_samples * self.segments {
            return bad("an analysis segment is longer than the whole recording".into());
        }
        Ok(())
    }

    pub fn array(&self) -> Result<ArrayGeometry, ExperimentError> {
        Ok(ArrayGeometry::ula(
            self.array_origin,
            self.mic_spacing,
            self.mic_count,
            [1.0, 0.0, 0.0],
        )?)
    }

    /// Number of samples to render so that the trailing frame of the last
    /// analysis segment is complete.
    pub fn render_samples(&self) -> usize {
        self.segments * self.segment_samples + self.pipeline.window_size.saturating_sub(self.pipeline.hop)
    }

    /// The scenario of Monte-Carlo trial `trial`. Each trial draws from its
    /// own stream of the master seed, so trials are independent of how many
    /// run and in what order.
    pub fn scenario(&self, trial: usize) -> Result<Scenario, ExperimentError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        let array = self.array()?;
        let c = array.center();
        let half = self.arc_span_deg / 2.0;
        let n = self.interferences + 1;
        let angles = loop {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-half..=half)).collect();
            let ok = (0..n).all(|i| (i + 1..n).all(|k| (a[i] - a[k]).abs() >= self.min_source_gap_deg));
            if ok {
                break a;
            }
        };
        let place = |deg: f64, z: f64| {
            let t = deg.to_radians();
            [c[0] + self.arc_radius * t.sin(), c[1] + self.arc_radius * t.cos(), z]
        };
        let interference_power = 10f64.powf(-self.input_sir_db / 10.0);
        let mut sources = vec![SourceSpec::desired(
            place(angles[0], self.desired_height),
            1.0,
            self.segments,
        )];
        for (j, &a) in angles[1..].iter().enumerate() {
            let [lo, hi] = self.interference_height;
            let z = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let activation = match self.activation {
                ActivationPattern::Alternating => (0..self.segments).map(|i| i == j % self.segments).collect(),
                ActivationPattern::Bernoulli { p } => (0..self.segments).map(|_| rng.random_bool(p)).collect(),
            };
            sources.push(SourceSpec::interference(place(a, z), interference_power, activation));
        }
        let sc = Scenario {
            room: self.room.clone(),
            array,
            sources,
            snr_db: self.snr_db,
            seed: rng.random(),
            segment_samples: self.segment_samples,
        };
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    /// Broadside angles of the desired source and the interferences, degrees.
    pub desired_deg: f64,
    pub interference_deg: Vec<f64>,
    pub rows: Vec<MetricReport>,
}

/// Name used in reports for the matrix behind a beamformer.
fn mean_label(kind: BeamformerKind, mean: MeanKind) -> String {
    match kind {
        BeamformerKind::Intersection => "segments".into(),
        _ => mean.name(),
    }
}

/// Runs one trial: render, estimate with every configured pair, score.
pub fn run_trial(spec: &ExperimentSpec, trial: usize) -> Result<TrialResult, ExperimentError> {
    let sc = spec.scenario(trial)?;
    let sig = render_signals(&sc, spec.render_samples())?;
    run_on_signals(spec, &sc, &sig.channels, sig.fs, trial)
}

/// Scores every (mean, beamformer) pair of `spec` on already rendered signals.
pub fn run_on_signals(
    spec: &ExperimentSpec,
    sc: &Scenario,
    channels: &[Vec<f64>],
    fs: f64,
    trial: usize,
) -> Result<TrialResult, ExperimentError> {
    let cfg = &spec.pipeline;
    let (_, segs) = compute_segments(channels, &sc.array, cfg)?;
    let grid = cfg.steering_grid(&sc.array, fs)?;
    let truth_d = sc.array.direction_of(sc.sources[0].position);
    let truth_i: Vec<f64> = sc.sources[1..]
        .iter()
        .map(|s| sc.array.direction_of(s.position))
        .collect();
    let wavelength = cfg.wavelength(fs);
    let mut rows = Vec::new();
    let mut done_intersection = false;
    for &mk in &spec.means {
        let mean = mean_matrix(&segs.matrices, mk, &cfg.mean)?;
        for &kind in &spec.beamformers {
            if kind == BeamformerKind::Intersection {
                if done_intersection {
                    continue;
                }
                done_intersection = true;
            }
            let bf = build_beamformer(kind, Some((&mean, mk)), &segs.matrices, cfg)?;
            let pattern = bf.evaluate(&grid)?;
            let est = pick_peaks(&pattern, cfg.n_sources, cfg.min_separation_deg.to_radians())?;
            let sir = output_sir(&pattern, truth_d, &truth_i)?;
            let doa = est.primary().map_or(f64::NAN, |t| (t - truth_d).abs().to_degrees());
            rows.push(MetricReport {
                scenario_id: format!("{}-{trial}", spec.seed),
                mean_kind: mean_label(kind, mk),
                beamformer: kind.name().into(),
                input_sir_db: spec.input_sir_db,
                output_sir_db: sir.per_interference_db(),
                mean_output_sir_db: sir.mean_db(),
                directivity: directivity_of(&bf, &sc.array, wavelength, truth_d)?,
                doa_error_deg: doa,
            });
        }
    }
    Ok(TrialResult {
        trial,
        desired_deg: truth_d.to_degrees(),
        interference_deg: truth_i.iter().map(|t| t.to_degrees()).collect(),
        rows,
    })
}

/// All trials, in trial order; parallel over trials.
pub fn run_monte_carlo(spec: &ExperimentSpec) -> Result<Vec<TrialResult>, ExperimentError> {
    spec.validate()?;
    (0..spec.monte_carlo)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect()
}

/// 25th, 50th and 75th percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

/// Percentile `q` in [0, 100] with linear interpolation between order
/// statistics. NaN values are ignored; `None` if nothing is left.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 100.0) / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let w = pos - lo as f64;
    if lo == hi || v[lo] == v[hi] {
        Some(v[lo])
    } else {
        Some(v[lo] + w * (v[hi] - v[lo]))
    }
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let p = |q| percentile(values, q).unwrap_or(f64::NAN);
    Quartiles {
        p25: p(25.0),
        p50: p(50.0),
        p75: p(75.0),
    }
}

/// Aggregate over trials of one (mean, beamformer) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean_kind: String,
    pub beamformer: String,
    pub input_sir_db: f64,
    pub trials: usize,
    pub output_sir_db: Quartiles,
    pub directivity_db: Quartiles,
    pub doa_error_deg: Quartiles,
}

/// Groups rows by (mean, beamformer) in first-seen order.
pub fn summarize(results: &[TrialResult]) -> Vec<Summary> {
    let mut keys: Vec<(String, String, f64)> = Vec::new();
    for r in results.iter().flat_map(|t| &t.rows) {
        let k = (r.mean_kind.clone(), r.beamformer.clone(), r.input_sir_db);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(mk, bf, sir)| {
            let rows: Vec<&MetricReport> = results
                .iter()
                .flat_map(|t| &t.rows)
                .filter(|r| r.mean_kind == mk && r.beamformer == bf && r.input_sir_db == sir)
                .collect();
            let col = |f: &dyn Fn(&MetricReport) -> f64| -> Vec<f64> { rows.iter().map(|r| f(r)).collect() };
            Summary {
                trials: rows.len(),
                output_sir_db: quartiles(&col(&|r| r.mean_output_sir_db)),
                directivity_db: quartiles(&col(&|r| to_db(r.directivity))),
                doa_error_deg: quartiles(&col(&|r| r.doa_error_deg)),
                mean_kind: mk,
                beamformer: bf,
                input_sir_db: sir,
            }
        })
        .collect()
}

/// Subspace rule for the mean matrix: an oracle dimension when given.
pub fn mean_dim_rule(oracle_dim: Option<usize>) -> SubspaceDimRule {
    oracle_dim.map_or(SubspaceDimRule::MeanMatrix, SubspaceDimRule::Oracle)
}
