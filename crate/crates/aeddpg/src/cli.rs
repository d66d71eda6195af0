//! Command-line surface.

use std::path::PathBuf;
use std::process::ExitCode;

use aeddpg_core::NoiseKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{parse_config, Resolved, KEYS};
use crate::diagnostics::{grad_check, spectral_check};
use crate::error::{Error, Result};
use crate::experiment::{run_preset, BUCKET_SECS};
use crate::metrics::read_metrics;
use crate::summary::summarize;

#[derive(Debug, Parser)]
#[command(name = "aeddpg", version, about = "Asynchronous episodic DDPG experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Shorthand for `--set preset=<name>`.
    #[arg(short, long)]
    pub preset: Option<String>,
    /// Override one key, e.g. `--set replay.rho=0.25`. Repeatable; beats the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<Resolved> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut overrides = Vec::new();
        if let Some(p) = &self.preset {
            overrides.push(format!("preset={p}"));
        }
        overrides.extend(self.overrides.iter().cloned());
        parse_config(&text, &overrides)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    RandomWalk,
    Gaussian,
    Ou,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every variant and seed of a preset and write metrics, checkpoints and a summary.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory.
        #[arg(short, long, default_value = "runs")]
        out: PathBuf,
    },
    /// Aggregate metrics files into per-run and cross-seed tables.
    Summarize {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Step bucket width.
        #[arg(long, default_value_t = 5000)]
        bucket_steps: u64,
        /// Wall-clock bucket width in seconds.
        #[arg(long, default_value_t = BUCKET_SECS)]
        bucket_secs: f64,
        /// Also write the machine-readable summary here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Resolve a config and print every field with its origin.
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArgs,
        /// List the accepted keys instead.
        #[arg(long)]
        keys: bool,
    },
    /// Estimate the log-log spectral slope of a noise process.
    SpectralCheck {
        #[arg(long, value_enum, default_value = "random-walk")]
        kind: NoiseArg,
        #[arg(long, default_value_t = 1 << 16)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// OU mean reversion rate.
        #[arg(long, default_value_t = 0.15)]
        theta: f64,
    },
    /// Compare backpropagated gradients with finite differences on random small networks.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Fail when the worst relative error exceeds this.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

pub fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out } => {
            let resolved = config.resolve()?;
            let (entries, summary) = run_preset(&resolved.config, &out)?;
            print!("{}", summary.to_text());
            println!("\n{} runs written under {}", entries.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize {
            files,
            bucket_steps,
            bucket_secs,
            json,
        } => {
            if bucket_steps == 0 || !(bucket_secs > 0.0) {
                return Err(Error::Invalid("bucket widths must be positive".into()));
            }
            let runs = files.iter().map(|f| read_metrics(f)).collect::<Result<Vec<_>>>()?;
            let summary = summarize(&runs, bucket_steps, bucket_secs);
            print!("{}", summary.to_text());
            if let Some(path) = json {
                std::fs::write(&path, summary.to_json()).map_err(|e| Error::io(&path, e))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { config, keys } => {
            if keys {
                for (k, doc) in KEYS {
                    println!("{k:<26} {doc}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            print!("{}", config.resolve()?.describe());
            Ok(ExitCode::SUCCESS)
        }
        Command::SpectralCheck {
            kind,
            samples,
            seed,
            theta,
        } => {
            let kind = match kind {
                NoiseArg::RandomWalk => NoiseKind::RandomWalk,
                NoiseArg::Gaussian => NoiseKind::Gaussian,
                NoiseArg::Ou => NoiseKind::OrnsteinUhlenbeck { theta },
            };
            let slope = spectral_check(kind, samples, seed)?;
            println!("{} psd slope over {samples} samples: {slope:.4}", kind.name());
            Ok(ExitCode::SUCCESS)
        }
        Command::GradCheck {
            trials,
            seed,
            tolerance,
        } => {
            let r = grad_check(trials, seed)?;
            println!("network {:.3e}", r.network);
            println!("critic  {:.3e}", r.critic);
            println!("actor   {:.3e}", r.actor);
            let ok = r.worst() < tolerance;
            println!("{} over {trials} trials (tolerance {tolerance:.0e})", if ok { "PASS" } else { "FAIL" });
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
