use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use riemann_doa::sim::{render_signals, Scenario, SourceKind};
use serde::{Deserialize, Serialize};

use crate::config::CliConfig;
use crate::wav;

/// Sidecar of a rendered WAV: everything `estimate` needs to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMetadata {
    pub fs: f64,
    pub samples: usize,
    pub channels: usize,
    /// Broadside angles of the desired sources, degrees.
    pub desired_deg: Vec<f64>,
    pub interference_deg: Vec<f64>,
    pub scenario: Scenario,
}

impl SignalMetadata {
    pub fn new(sc: Scenario, fs: f64, samples: usize) -> Self {
        let angles = |kind| -> Vec<f64> {
            sc.sources
                .iter()
                .filter(|s| s.kind == kind)
                .map(|s| sc.array.direction_of(s.position).to_degrees())
                .collect()
        };
        Self {
            fs,
            samples,
            channels: sc.array.len(),
            desired_deg: angles(SourceKind::Desired),
            interference_deg: angles(SourceKind::Interference),
            scenario: sc,
        }
    }

    /// Metadata path next to a WAV file.
    pub fn path_for(wav: &Path) -> PathBuf {
        wav.with_extension("json")
    }
}

pub fn run(cfg: &CliConfig, seed: Option<u64>, out: &Path) -> Result<PathBuf> {
    let spec = &cfg.experiment;
    let (sc, samples) = match cfg.scenario_file(seed)? {
        Some(sc) => {
            let tail = spec.pipeline.window_size.saturating_sub(spec.pipeline.hop);
            let n = sc.total_samples() + tail;
            (sc, n)
        }
        None => (spec.scenario(cfg.trial)?, spec.render_samples()),
    };
    let sig = render_signals(&sc, samples)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let wav_path = out.join("signals.wav");
    wav::write_f32(&wav_path, sig.fs, &sig.channels)?;
    let meta = SignalMetadata::new(sc, sig.fs, sig.len());
    let json = serde_json::to_string_pretty(&meta)?;
    fs::write(SignalMetadata::path_for(&wav_path), json + "\n")?;
    eprintln!(
        "wrote {} ({} channels, {} samples at {} Hz)",
        wav_path.display(),
        meta.channels,
        meta.samples,
        meta.fs
    );
    Ok(wav_path)
}
