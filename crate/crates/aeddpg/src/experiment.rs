//! Preset expansion into per-variant, per-seed runs on disk.

use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::read_metrics;
use crate::runner::{run_experiment, RunReport, METRICS_FILE};
use crate::summary::{summarize, Summary};

pub const CONFIG_FILE: &str = "config.txt";
pub const SUMMARY_TEXT: &str = "summary.txt";
pub const SUMMARY_JSON: &str = "summary.json";
pub const BUCKET_SECS: f64 = 10.0;

#[derive(Debug)]
pub struct RunEntry {
    pub variant: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub report: RunReport,
}

/// Step bucket width used for a run budget: twenty buckets, at least one step.
pub fn default_bucket_steps(total_env_steps: u64) -> u64 {
    total_env_steps.div_ceil(20).max(1)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every variant of the preset for `config.seeds` seeds under `out`:
/// `out/<variant>/seed-<seed>/` per run, plus `config.txt` and the summary
/// tables at the top level.
pub fn run_preset(config: &ExperimentConfig, out: &Path) -> Result<(Vec<RunEntry>, Summary)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(&out.join(CONFIG_FILE), &config.to_text())?;
    let mut entries = Vec::new();
    for (variant, vc) in config.variants() {
        write(&out.join(format!("{variant}.config.txt")), &vc.to_text())?;
        for i in 0..config.seeds {
            let rc = vc.run_config(i);
            let dir = out.join(&variant).join(format!("seed-{}", rc.seed));
            log::info!("running {variant} seed {} into {}", rc.seed, dir.display());
            let report = run_experiment(&rc, &variant, &dir)?;
            log::info!(
                "{variant} seed {}: {} steps, {} updates, {} episodes in {:.1} s",
                rc.seed,
                report.env_steps,
                report.updates,
                report.episodes,
                report.elapsed.as_secs_f64()
            );
            entries.push(RunEntry {
                variant: variant.clone(),
                seed: rc.seed,
                dir,
                report,
            });
        }
    }
    let runs = entries
        .iter()
        .map(|e| read_metrics(&e.dir.join(METRICS_FILE)))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&runs, default_bucket_steps(config.total_env_steps), BUCKET_SECS);
    write(&out.join(SUMMARY_TEXT), &summary.to_text())?;
    write(&out.join(SUMMARY_JSON), &summary.to_json())?;
    Ok((entries, summary))
}
