use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use riemann_doa::experiment::ExperimentSpec;
use riemann_doa::sim::Scenario;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Contents of `--config`. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Room, array, source placement, pipeline and the beamformer and mean
    /// lists. Defaults to the two-interference setup.
    pub experiment: ExperimentSpec,
    /// Scenario file (TOML or JSON) used by `simulate` instead of drawing
    /// trial `trial` from `experiment`. Relative to the config file.
    pub scenario: Option<PathBuf>,
    pub trial: usize,
    pub sweep: SweepAxes,
    pub out: Option<PathBuf>,
}

/// Axes of `sweep`. An empty list means the single value from `experiment`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub input_sir_db: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub t60: Vec<f64>,
    pub monte_carlo: Option<usize>,
    pub seeds: Vec<u64>,
}

/// Parses `path` as JSON when it has a `.json` extension and as TOML otherwise.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {} as JSON", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {} as TOML", path.display()))
    }
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let mut cfg: Self = read_structured(path)?;
        if let Some(s) = &cfg.scenario {
            if s.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.scenario = Some(base.join(s));
            }
        }
        Ok(cfg)
    }

    /// Applies `--seed`.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.experiment.seed = s;
        }
        self
    }

    /// The explicit scenario file, if any, with `seed` overriding its own.
    pub fn scenario_file(&self, seed: Option<u64>) -> Result<Option<Scenario>> {
        let Some(path) = &self.scenario else {
            return Ok(None);
        };
        let mut sc: Scenario = read_structured(path)?;
        if let Some(s) = seed {
            sc.seed = s;
        }
        sc.validate().with_context(|| format!("scenario {}", path.display()))?;
        Ok(Some(sc))
    }

    /// `--out`, else the config's `out`, else `out`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// One point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub input_sir_db: f64,
    pub snr_db: f64,
    pub t60: f64,
}

impl SweepAxes {
    /// Axis values with empty axes filled from `base`.
    pub fn points(&self, base: &ExperimentSpec) -> Vec<SweepPoint> {
        let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let sirs = or(&self.input_sir_db, base.input_sir_db);
        let snrs = or(&self.snr_db, base.snr_db);
        let t60s = or(&self.t60, base.room.t60);
        let mut out = Vec::new();
        for &input_sir_db in &sirs {
            for &snr_db in &snrs {
                for &t60 in &t60s {
                    out.push(SweepPoint {
                        input_sir_db,
                        snr_db,
                        t60,
                    });
                }
            }
        }
        out
    }

    pub fn seeds(&self, base: &ExperimentSpec, flag: Option<u64>) -> Vec<u64> {
        match (flag, self.seeds.is_empty()) {
            (_, false) => self.seeds.clone(),
            (Some(s), true) => vec![s],
            (None, true) => vec![base.seed],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.monte_carlo == Some(0) {
            bail!("sweep.monte_carlo must be at least 1");
        }
        let all = self.input_sir_db.iter().chain(&self.snr_db).chain(&self.t60);
        if let Some(x) = all.into_iter().find(|x| !x.is_finite()) {
            bail!("non-finite sweep value {x}");
        }
        Ok(())
    }
}
