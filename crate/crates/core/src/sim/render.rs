use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{image_source_air, Scenario, SimError};

/// Time-domain signals, one vector per microphone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultichannelSignal {
    pub fs: f64,
    pub channels: Vec<Vec<f64>>,
}

impl MultichannelSignal {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The gated white Gaussian signal emitted by source `index`.
pub fn source_signal(sc: &Scenario, index: usize, samples: usize) -> Vec<f64> {
    let src = &sc.sources[index];
    let mut rng = rng_for(sc.seed, sc.stream_of(index));
    let std = src.power.sqrt();
    (0..samples)
        .map(|n| {
            let x: f64 = StandardNormal.sample(&mut rng);
            if src.is_active_at(n, sc.segment_samples) {
                std * x
            } else {
                0.0
            }
        })
        .collect()
}

/// Spatially white sensor noise, one channel after another from stream 0.
pub fn sensor_noise(sc: &Scenario, samples: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_for(sc.seed, 0);
    let std = sc.noise_variance().sqrt();
    (0..sc.array.len())
        .map(|_| {
            (0..samples)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    std * x
                })
                .collect()
        })
        .collect()
}

/// Renders `samples` samples of every microphone signal:
/// each source convolved with its room response, summed, plus sensor noise.
pub fn render_signals(sc: &Scenario, samples: usize) -> Result<MultichannelSignal, SimError> {
    sc.validate()?;
    if samples < sc.total_samples() {
        return Err(SimError::Config(format!(
            "{samples} samples do not cover {} segments of {} samples",
            sc.segment_count(),
            sc.segment_samples
        )));
    }
    let air_len = sc.room.air_length;
    let fft_len = (samples + air_len - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let to_spectrum = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(fft_len, Complex::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    };

    let source_spectra: Vec<Vec<Complex<f64>>> = (0..sc.sources.len())
        .into_par_iter()
        .map(|j| to_spectrum(&source_signal(sc, j, samples)))
        .collect();

    let mics = sc.array.positions();
    let mixed: Vec<Result<Vec<f64>, SimError>> = mics
        .par_iter()
        .map(|&mic| {
            let mut acc = vec![Complex::new(0.0, 0.0); fft_len];
            for (src, spec) in sc.sources.iter().zip(&source_spectra) {
                let h = to_spectrum(&image_source_air(&sc.room, src.position, mic)?);
                for ((a, s), hh) in acc.iter_mut().zip(spec).zip(&h) {
                    *a += s * hh;
                }
            }
            inv.process(&mut acc);
            let scale = 1.0 / fft_len as f64;
            Ok(acc[..samples].iter().map(|c| c.re * scale).collect())
        })
        .collect();

    let noise = sensor_noise(sc, samples);
    let mut channels = Vec::with_capacity(mics.len());
    for (ch, n) in mixed.into_iter().zip(noise) {
        let mut ch = ch?;
        for (x, v) in ch.iter_mut().zip(n) {
            *x += v;
        }
        channels.push(ch);
    }
    Ok(MultichannelSignal {
        fs: sc.room.fs,
        channels,
    })
}
