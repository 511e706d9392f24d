use std::path::Path;

use anyhow::{bail, Context, Result};
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

/// Writes `channels` as an interleaved 32-bit float WAV.
pub fn write_f32(path: &Path, fs: f64, channels: &[Vec<f64>]) -> Result<()> {
    let n = channels.first().map_or(0, Vec::len);
    if channels.iter().any(|c| c.len() != n) {
        bail!("channels have different lengths");
    }
    if fs.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&fs) {
        bail!("sampling rate {fs} is not a positive integer");
    }
    let spec = WavSpec {
        channels: u16::try_from(channels.len()).context("too many channels for WAV")?,
        sample_rate: fs as u32,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for i in 0..n {
        for c in channels {
            w.write_sample(c[i] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}

/// Reads a WAV file into per-channel vectors; integer formats are scaled to [-1, 1).
pub fn read(path: &Path) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut r = WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = r.spec();
    let m = spec.channels as usize;
    let samples: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()?
        }
    };
    let mut channels = vec![Vec::with_capacity(samples.len() / m.max(1)); m];
    for (i, s) in samples.into_iter().enumerate() {
        channels[i % m].push(s);
    }
    Ok((spec.sample_rate as f64, channels))
}
