//! `rdoa`: simulate recordings, estimate directions of arrival, run the
//! verification suites and Monte-Carlo sweeps.

mod config;
mod estimate;
mod simulate;
mod sweep;
mod verify;
mod wav;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use riemann_doa::beam::{BeamformerKind, MeanKind};

use config::CliConfig;

#[derive(Parser)]
#[command(
    name = "rdoa",
    version,
    about = "Riemannian-mean DoA estimation under intermittent interference"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config file (`.json` files are read as JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: config `out`, else ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario to a 32-bit float WAV plus a JSON sidecar.
    Simulate,
    /// Estimate directions from a WAV file and write patterns and metrics.
    Estimate {
        /// Multichannel WAV, e.g. the output of `simulate`.
        #[arg(long)]
        input: PathBuf,
        /// Scenario sidecar [default: the input path with a .json extension, if present].
        #[arg(long)]
        metadata: Option<PathBuf>,
        /// Track the running Riemannian mean segment by segment.
        #[arg(long)]
        streaming: bool,
        #[command(flatten)]
        pair: PairArgs,
        /// Use this signal-subspace dimension for the mean matrix.
        #[arg(long)]
        oracle_dim: Option<usize>,
    },
    /// Run the theory verification suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: verify::SuiteArg,
    },
    /// Monte-Carlo experiment over input SIR, SNR, T60 and seeds.
    Sweep {
        #[command(flatten)]
        pair: PairArgs,
    },
}

#[derive(Args)]
struct PairArgs {
    /// riemannian, euclidean, logeuclidean or segmentN [default: config list].
    #[arg(long)]
    mean: Option<MeanKind>,
    /// ds, sbsp, mvdr or intersection [default: config list].
    #[arg(long)]
    beamformer: Option<BeamformerKind>,
}

enum Outcome {
    Done,
    ChecksFailed,
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = cli.global;
    let cfg = CliConfig::load(g.config.as_deref())?;
    let out = cfg.out_dir(g.out.as_deref());
    match cli.command {
        Command::Simulate => {
            simulate::run(&cfg.clone().with_seed(g.seed), g.seed, &out)?;
        }
        Command::Estimate {
            input,
            metadata,
            streaming,
            pair,
            oracle_dim,
        } => {
            let args = estimate::EstimateArgs {
                input,
                metadata,
                streaming,
                mean: pair.mean,
                beamformer: pair.beamformer,
                oracle_dim,
            };
            estimate::run(&cfg, &args, &out)?;
        }
        Command::Verify { suite } => {
            if !verify::run(suite, g.seed.unwrap_or(1), &out)? {
                return Ok(Outcome::ChecksFailed);
            }
        }
        Command::Sweep { pair } => {
            let rows = sweep::run(&cfg, g.seed, pair.mean, pair.beamformer, &out)?;
            eprintln!("wrote {rows} summary rows to {}", out.join("summary.csv").display());
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
