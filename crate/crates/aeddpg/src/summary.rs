//! Per-run and cross-seed aggregates of episode returns.
//!
//! Episodes are bucketed by the global step count at which they ended (and,
//! separately, by wall clock). Within a run a bucket's value is the mean
//! return of its episodes; across the runs of a variant the table reports the
//! mean and the population standard deviation of those per-run values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::metrics::{Header, Record};

pub const FINAL_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub episodes: usize,
    pub updates: usize,
    pub env_steps: u64,
    pub mean_return: Option<f64>,
    pub best_return: Option<f64>,
    /// Mean over the last `FINAL_WINDOW` episodes (or all, if fewer).
    pub final_return: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    pub variant: String,
    pub start: f64,
    pub end: f64,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub bucket_steps: u64,
    pub bucket_secs: f64,
    pub runs: Vec<RunSummary>,
    pub by_steps: Vec<BucketRow>,
    pub by_wall_clock: Vec<BucketRow>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per variant, per bucket: the per-run bucket means.
type Grid = BTreeMap<String, BTreeMap<u64, Vec<f64>>>;

fn rows(grid: &Grid, width: f64) -> Vec<BucketRow> {
    let mut out = Vec::new();
    for (variant, buckets) in grid {
        for (b, vals) in buckets {
            let (mean, std) = mean_std(vals);
            out.push(BucketRow {
                variant: variant.clone(),
                start: *b as f64 * width,
                end: (*b + 1) as f64 * width,
                runs: vals.len(),
                mean,
                std,
            });
        }
    }
    out
}

pub fn summarize(runs: &[(Header, Vec<Record>)], bucket_steps: u64, bucket_secs: f64) -> Summary {
    assert!(bucket_steps > 0 && bucket_secs > 0.0, "bucket widths must be positive");
    let mut by_steps: Grid = BTreeMap::new();
    let mut by_clock: Grid = BTreeMap::new();
    let mut summaries = Vec::new();
    for (header, records) in runs {
        let episodes: Vec<_> = records
            .iter()
            .filter_map(|r| match r {
                Record::Episode(e) => Some(e),
                _ => None,
            })
            .collect();
        let returns: Vec<f64> = episodes.iter().map(|e| e.episode_reward).collect();
        let mut step_cells: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        let mut clock_cells: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for e in &episodes {
            step_cells
                .entry(e.env_steps_total.saturating_sub(1) / bucket_steps)
                .or_default()
                .push(e.episode_reward);
            if let Some(t) = e.wall_clock_s {
                clock_cells.entry((t / bucket_secs) as u64).or_default().push(e.episode_reward);
            }
        }
        for (grid, cells) in [(&mut by_steps, step_cells), (&mut by_clock, clock_cells)] {
            let slot = grid.entry(header.variant.clone()).or_default();
            for (b, vals) in cells {
                slot.entry(b).or_default().push(mean(&vals).expect("non-empty cell"));
            }
        }
        let tail = &returns[returns.len().saturating_sub(FINAL_WINDOW)..];
        summaries.push(RunSummary {
            variant: header.variant.clone(),
            seed: header.seed,
            episodes: episodes.len(),
            updates: records.iter().filter(|r| matches!(r, Record::Update(_))).count(),
            env_steps: records
                .iter()
                .map(|r| match r {
                    Record::Episode(e) => e.env_steps_total,
                    Record::Update(u) => u.env_steps_total,
                })
                .max()
                .unwrap_or(0),
            mean_return: mean(&returns),
            best_return: returns.iter().copied().reduce(f64::max),
            final_return: mean(tail),
        });
    }
    Summary {
        bucket_steps,
        bucket_secs,
        runs: summaries,
        by_steps: rows(&by_steps, bucket_steps as f64),
        by_wall_clock: rows(&by_clock, bucket_secs),
    }
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

impl Summary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "runs");
        let _ = writeln!(
            s,
            "{:<20} {:>8} {:>9} {:>9} {:>10} {:>12} {:>12} {:>12}",
            "variant", "seed", "episodes", "updates", "steps", "mean", "best", "final"
        );
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:<20} {:>8} {:>9} {:>9} {:>10} {:>12} {:>12} {:>12}",
                r.variant,
                r.seed,
                r.episodes,
                r.updates,
                r.env_steps,
                cell(r.mean_return),
                cell(r.best_return),
                cell(r.final_return)
            );
        }
        for (title, rows) in [
            (format!("episode return by env steps (bucket {})", self.bucket_steps), &self.by_steps),
            (format!("episode return by wall clock (bucket {} s)", self.bucket_secs), &self.by_wall_clock),
        ] {
            let _ = writeln!(s, "\n{title}");
            let _ = writeln!(
                s,
                "{:<20} {:>12} {:>12} {:>5} {:>12} {:>12}",
                "variant", "from", "to", "runs", "mean", "std"
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<20} {:>12} {:>12} {:>5} {:>12.3} {:>12.3}",
                    r.variant, r.start, r.end, r.runs, r.mean, r.std
                );
            }
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
