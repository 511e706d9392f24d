use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use riemann_doa::analysis::{directivity_of, output_sir, to_db, MetricReport};
use riemann_doa::array::ArrayGeometry;
use riemann_doa::beam::{
    build_beamformer, compute_segments, doa_streaming, mean_matrix, pick_peaks, BeamPattern, Beamformer,
    BeamformerKind, DoaEstimate, MeanKind, PipelineConfig,
};
use riemann_doa::experiment::mean_dim_rule;
use riemann_doa::hpd::HpdMatrix;
use serde::Serialize;

use crate::config::CliConfig;
use crate::simulate::SignalMetadata;
use crate::wav;

#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub input: PathBuf,
    /// Defaults to the JSON sidecar written by `simulate`.
    pub metadata: Option<PathBuf>,
    pub streaming: bool,
    pub mean: Option<MeanKind>,
    pub beamformer: Option<BeamformerKind>,
    pub oracle_dim: Option<usize>,
}

/// Known source directions in radians, from the metadata.
struct Truth {
    desired: Vec<f64>,
    interferences: Vec<f64>,
    input_sir_db: f64,
}

impl Truth {
    fn from_metadata(m: &SignalMetadata) -> Self {
        use riemann_doa::sim::SourceKind;
        let power = |kind| -> Vec<f64> {
            m.scenario
                .sources
                .iter()
                .filter(|s| s.kind == kind)
                .map(|s| s.power)
                .collect()
        };
        let (pd, pi) = (power(SourceKind::Desired), power(SourceKind::Interference));
        let input_sir_db = if pi.is_empty() {
            f64::NAN
        } else {
            to_db(pd[0] / (pi.iter().sum::<f64>() / pi.len() as f64))
        };
        Self {
            desired: m.desired_deg.iter().map(|d| d.to_radians()).collect(),
            interferences: m.interference_deg.iter().map(|d| d.to_radians()).collect(),
            input_sir_db,
        }
    }

    /// Degrees from `theta` to the nearest desired source.
    fn error_deg(&self, theta: Option<f64>) -> f64 {
        let Some(t) = theta else { return f64::NAN };
        self.desired
            .iter()
            .map(|d| (t - d).abs().to_degrees())
            .fold(f64::NAN, f64::min)
    }
}

#[derive(Serialize)]
struct PatternRow<'a> {
    mean_kind: &'a str,
    beamformer: &'a str,
    theta_deg: f64,
    power: f64,
    power_db: f64,
}

#[derive(Serialize)]
struct MetricRow<'a> {
    scenario_id: &'a str,
    mean_kind: &'a str,
    beamformer: &'a str,
    input_sir_db: f64,
    mean_output_sir_db: f64,
    output_sir_db: String,
    directivity: f64,
    directivity_db: f64,
    doa_error_deg: f64,
}

#[derive(Serialize)]
struct StreamRow<'a> {
    beamformer: &'a str,
    segment: usize,
    doa_deg: f64,
    doa_error_deg: f64,
}

#[derive(Serialize)]
struct EstimateEntry {
    mean_kind: String,
    beamformer: String,
    /// Present in streaming mode: 1-based count of segments seen.
    #[serde(skip_serializing_if = "Option::is_none")]
    segment: Option<usize>,
    doa_deg: Vec<f64>,
    peak_powers: Vec<f64>,
    incomplete: bool,
    doa_error_deg: Option<f64>,
}

#[derive(Serialize)]
struct EstimateReport {
    mode: &'static str,
    input: String,
    fs: f64,
    channels: usize,
    segments: usize,
    estimates: Vec<EstimateEntry>,
    metrics: Vec<MetricReport>,
    /// Correlation matrices fed to the beamformers, by mean kind.
    means: BTreeMap<String, HpdMatrix>,
}

/// A scored (mean, beamformer) pair.
struct PairOutput {
    mean_label: String,
    beamformer: Beamformer,
    pattern: BeamPattern,
    estimate: DoaEstimate,
}

struct Scorer<'a> {
    geom: &'a ArrayGeometry,
    cfg: PipelineConfig,
    fs: f64,
    truth: Option<Truth>,
    scenario_id: String,
}

impl Scorer<'_> {
    fn entry(
        &self,
        mean_label: &str,
        kind: BeamformerKind,
        est: &DoaEstimate,
        segment: Option<usize>,
    ) -> EstimateEntry {
        EstimateEntry {
            mean_kind: mean_label.into(),
            beamformer: kind.name().into(),
            segment,
            doa_deg: est.directions.iter().map(|t| t.to_degrees()).collect(),
            peak_powers: est.peak_powers.clone(),
            incomplete: est.incomplete,
            doa_error_deg: self.truth.as_ref().map(|t| t.error_deg(est.primary())),
        }
    }

    fn metrics(&self, p: &PairOutput) -> Result<Option<MetricReport>> {
        let Some(truth) = &self.truth else { return Ok(None) };
        let Some(&theta_d) = truth.desired.first() else {
            return Ok(None);
        };
        let (per, mean) = if truth.interferences.is_empty() {
            (Vec::new(), f64::NAN)
        } else {
            let s = output_sir(&p.pattern, theta_d, &truth.interferences)?;
            (s.per_interference_db(), s.mean_db())
        };
        Ok(Some(MetricReport {
            scenario_id: self.scenario_id.clone(),
            mean_kind: p.mean_label.clone(),
            beamformer: p.beamformer.kind().name().into(),
            input_sir_db: truth.input_sir_db,
            output_sir_db: per,
            mean_output_sir_db: mean,
            directivity: directivity_of(&p.beamformer, self.geom, self.cfg.wavelength(self.fs), theta_d)?,
            doa_error_deg: truth.error_deg(p.estimate.primary()),
        }))
    }
}

fn load_metadata(args: &EstimateArgs) -> Result<Option<SignalMetadata>> {
    let (path, required) = match &args.metadata {
        Some(p) => (p.clone(), true),
        None => (SignalMetadata::path_for(&args.input), false),
    };
    if !required && !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let meta = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(meta))
}

pub fn run(cfg: &CliConfig, args: &EstimateArgs, out: &Path) -> Result<()> {
    let (fs_, channels) = wav::read(&args.input)?;
    let meta = load_metadata(args)?;
    let geom = match &meta {
        Some(m) => m.scenario.array.clone(),
        None => cfg.experiment.array()?,
    };
    if channels.len() != geom.len() {
        bail!(
            "{} has {} channels but the array has {} microphones",
            args.input.display(),
            channels.len(),
            geom.len()
        );
    }
    if let Some(m) = &meta {
        if m.fs != fs_ {
            bail!("WAV sampling rate {fs_} differs from the metadata's {}", m.fs);
        }
    }
    let mut pipeline = cfg.experiment.pipeline.clone();
    if args.oracle_dim.is_some() {
        pipeline.mean_dim_rule = mean_dim_rule(args.oracle_dim);
    }
    let ctx = Scorer {
        geom: &geom,
        cfg: pipeline,
        fs: fs_,
        truth: meta.as_ref().map(Truth::from_metadata),
        scenario_id: args
            .input
            .file_stem()
            .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned()),
    };
    let beamformers = args
        .beamformer
        .map_or_else(|| cfg.experiment.beamformers.clone(), |b| vec![b]);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = EstimateReport {
        mode: if args.streaming { "streaming" } else { "batch" },
        input: args.input.display().to_string(),
        fs: fs_,
        channels: channels.len(),
        segments: 0,
        estimates: Vec::new(),
        metrics: Vec::new(),
        means: BTreeMap::new(),
    };
    let pairs = if args.streaming {
        if args.mean.is_some_and(|m| m != MeanKind::Riemannian) {
            bail!("streaming estimation tracks the Riemannian mean only");
        }
        streaming(&ctx, &channels, &beamformers, &mut report, out)?
    } else {
        let means = args.mean.map_or_else(|| cfg.experiment.means.clone(), |m| vec![m]);
        batch(&ctx, &channels, &means, &beamformers, &mut report)?
    };

    let mut pw = csv::Writer::from_path(out.join("pattern.csv"))?;
    let mut mw = csv::Writer::from_path(out.join("metrics.csv"))?;
    for p in &pairs {
        let bf = p.beamformer.kind().name();
        for (&t, &v) in p.pattern.thetas.iter().zip(&p.pattern.power) {
            pw.serialize(PatternRow {
                mean_kind: &p.mean_label,
                beamformer: bf,
                theta_deg: t.to_degrees(),
                power: v,
                power_db: to_db(v),
            })?;
        }
        if let Some(m) = ctx.metrics(p)? {
            mw.serialize(MetricRow {
                scenario_id: &m.scenario_id,
                mean_kind: &m.mean_kind,
                beamformer: &m.beamformer,
                input_sir_db: m.input_sir_db,
                mean_output_sir_db: m.mean_output_sir_db,
                output_sir_db: m
                    .output_sir_db
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                directivity: m.directivity,
                directivity_db: to_db(m.directivity),
                doa_error_deg: m.doa_error_deg,
            })?;
            report.metrics.push(m);
        }
    }
    pw.flush()?;
    mw.flush()?;
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(out.join("estimate.json"), json + "\n")?;
    for e in report.estimates.iter().filter(|e| e.segment.is_none()) {
        let doa: Vec<String> = e.doa_deg.iter().map(|d| format!("{d:.1}")).collect();
        println!("{:<12} {:<12} DoA {}", e.mean_kind, e.beamformer, doa.join(", "));
    }
    Ok(())
}

fn batch(
    ctx: &Scorer,
    channels: &[Vec<f64>],
    means: &[MeanKind],
    beamformers: &[BeamformerKind],
    report: &mut EstimateReport,
) -> Result<Vec<PairOutput>> {
    let cfg = &ctx.cfg;
    let (_, segs) = compute_segments(channels, ctx.geom, cfg)?;
    report.segments = segs.len();
    let grid = cfg.steering_grid(ctx.geom, ctx.fs)?;
    let mut out = Vec::new();
    let mut done_intersection = false;
    for &mk in means {
        let mean = mean_matrix(&segs.matrices, mk, &cfg.mean)?;
        for &kind in beamformers {
            let label = if kind == BeamformerKind::Intersection {
                if done_intersection {
                    continue;
                }
                done_intersection = true;
                "segments".to_string()
            } else {
                mk.name()
            };
            let beamformer = build_beamformer(kind, Some((&mean, mk)), &segs.matrices, cfg)?;
            let pattern = beamformer.evaluate(&grid)?;
            let estimate = pick_peaks(&pattern, cfg.n_sources, cfg.min_separation_deg.to_radians())?;
            report.estimates.push(ctx.entry(&label, kind, &estimate, None));
            out.push(PairOutput {
                mean_label: label,
                beamformer,
                pattern,
                estimate,
            });
        }
        report.means.insert(mk.name(), mean);
    }
    Ok(out)
}

fn streaming(
    ctx: &Scorer,
    channels: &[Vec<f64>],
    beamformers: &[BeamformerKind],
    report: &mut EstimateReport,
    out: &Path,
) -> Result<Vec<PairOutput>> {
    let cfg = &ctx.cfg;
    let mut sw = csv::Writer::from_path(out.join("streaming.csv"))?;
    let mut pairs = Vec::new();
    let label = MeanKind::Riemannian.name();
    for &kind in beamformers {
        let (seq, state) = doa_streaming(channels, ctx.fs, ctx.geom, cfg, kind)?;
        report.segments = seq.len();
        for (i, est) in seq.iter().enumerate() {
            let entry = ctx.entry(&label, kind, est, Some(i + 1));
            sw.serialize(StreamRow {
                beamformer: kind.name(),
                segment: i + 1,
                doa_deg: entry.doa_deg.first().copied().unwrap_or(f64::NAN),
                doa_error_deg: entry.doa_error_deg.unwrap_or(f64::NAN),
            })?;
            report.estimates.push(entry);
        }
        let beamformer = build_beamformer(kind, Some((state.mean(), MeanKind::Riemannian)), &[], cfg)?;
        let pattern = state.pattern()?;
        let estimate = match seq.last() {
            Some(e) => e.clone(),
            None => bail!(
                "the recording is shorter than one segment of {} frames",
                cfg.segment_frames
            ),
        };
        report.estimates.push(ctx.entry(&label, kind, &estimate, None));
        report.means.insert(label.clone(), state.mean().clone());
        pairs.push(PairOutput {
            mean_label: label.clone(),
            beamformer,
            pattern,
            estimate,
        });
    }
    sw.flush()?;
    Ok(pairs)
}
