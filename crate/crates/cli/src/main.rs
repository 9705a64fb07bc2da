//! `mbn`: Monte-Carlo sweeps of the inter-operator backhaul simulator.
//!
//! Exit status is 0 on success, 2 for bad input (unknown preset, malformed
//! config or override, an exhaustive search that is too large) and 1 when a
//! run or a write fails.

mod output;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sweep::{SchemeName, SweepConfig, UsageError, PRESETS};

#[derive(Parser)]
#[command(name = "mbn", version, about = "Sweeps for the mmWave inter-operator multi-hop backhaul simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write sumrate.csv, cdf.csv, cost.csv, overhead.csv and manifest.json.
    Run {
        #[command(flatten)]
        sweep: SweepArgs,
        /// Output directory.
        #[arg(long, env = "MBN_OUT_DIR", default_value = "results")]
        out: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the resolved sweep configuration as JSON.
    Config {
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in sweep named after the figure it reproduces (see `mbn presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Number of Monte-Carlo seeds per point.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    first_seed: Option<u64>,
    /// Schemes to run; repeat or comma-separate.
    #[arg(long = "scheme", value_delimiter = ',')]
    schemes: Vec<String>,
    /// Dotted overrides such as `radio.rho=0.2` or `sweep.num_sbs=[5,10]`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<SweepConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SweepConfig::from_json(&text)?
            }
            (None, Some(name)) => sweep::preset(name)?,
            (None, None) => SweepConfig::default(),
        };
        cfg = cfg.with_overrides(&self.overrides)?;
        if let Some(n) = self.seeds {
            cfg.seeds = n;
        }
        if let Some(s) = self.first_seed {
            cfg.first_seed = s;
        }
        if !self.schemes.is_empty() {
            cfg.schemes = self
                .schemes
                .iter()
                .map(|s| SchemeName::parse(s).map_err(|e| UsageError(e.to_string()).into()))
                .collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_sweep(cfg: &SweepConfig, out: &Path) -> Result<()> {
    let start = Instant::now();
    let points = cfg.points().len();
    eprintln!(
        "running {} point(s) x {} seed(s) x {} scheme(s)",
        points,
        cfg.seeds,
        cfg.schemes.len()
    );
    let records = output::execute(cfg)?;
    let files = output::write_all(out, cfg, &records)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    eprintln!("{} runs in {:.1?}", records.len(), start.elapsed());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { sweep, out, workers } => {
            let cfg = sweep.resolve()?;
            if let Some(n) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("starting worker pool")?;
            }
            run_sweep(&cfg, &out)
        }
        Command::Config { sweep } => {
            println!("{}", serde_json::to_string_pretty(&sweep.resolve()?)?);
            Ok(())
        }
        Command::Presets => {
            for (name, what) in PRESETS {
                println!("{name:<10} {what}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
