use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use riemann_doa::verify::{Suite, SuiteReport};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Geometry,
    Lemma1,
    Props,
    Example1,
    Misalignment,
    All,
}

impl SuiteArg {
    fn suites(self) -> Vec<Suite> {
        match self {
            Self::Geometry => vec![Suite::Geometry],
            Self::Lemma1 => vec![Suite::Lemma1],
            Self::Props => vec![Suite::Props],
            Self::Example1 => vec![Suite::Example1],
            Self::Misalignment => vec![Suite::Misalignment],
            Self::All => Suite::ALL.to_vec(),
        }
    }
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    passed: bool,
    suites: Vec<SuiteReport>,
}

/// Runs the suites, prints one line per check and writes `verify.json`.
/// Returns whether every check passed.
pub fn run(suite: SuiteArg, seed: u64, out: &Path) -> Result<bool> {
    let suites: Vec<SuiteReport> = suite
        .suites()
        .into_iter()
        .map(|s| {
            let r = s.run(seed);
            println!("[{}]", r.suite);
            for c in &r.checks {
                println!("  {c}");
            }
            r
        })
        .collect();
    let passed = suites.iter().all(|s| s.passed);
    let failed: usize = suites.iter().flat_map(|s| &s.checks).filter(|c| !c.passed).count();
    println!(
        "{}",
        if passed {
            "all checks passed".to_string()
        } else {
            format!("{failed} checks failed")
        }
    );
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let report = VerifyReport { seed, passed, suites };
    fs::write(out.join("verify.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(passed)
}
