//! Line-delimited JSON metrics.
//!
//! The first line is a [`Header`] naming the schema and its version; every
//! following line is one [`Record`], tagged by `kind`. Non-finite values are
//! never written: `r_max` is `null` until the first episode completes, and
//! `wall_clock_s` is `null` in synchronous runs so that their files are
//! reproducible byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "aeddpg-metrics";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    pub variant: String,
    pub seed: u64,
}

impl Header {
    pub fn new(variant: impl Into<String>, seed: u64) -> Self {
        Self {
            schema: SCHEMA.into(),
            version: SCHEMA_VERSION,
            variant: variant.into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub wall_clock_s: Option<f64>,
    pub env_steps_total: u64,
    pub worker_id: u32,
    pub episode_index: u64,
    pub episode_seed: u64,
    pub episode_reward: f64,
    pub episode_len: usize,
    pub admitted: bool,
    pub r_max: Option<f64>,
    pub memory_occupancy: usize,
    pub hmemory_occupancy: usize,
    /// Newest snapshot version the worker acted with during the episode.
    pub snapshot_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub wall_clock_s: Option<f64>,
    pub env_steps_total: u64,
    pub update_index: u64,
    /// `None` when the update was aborted on a non-finite loss.
    pub critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
    pub r_max: Option<f64>,
    pub memory_occupancy: usize,
    pub hmemory_occupancy: usize,
    pub snapshot_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Episode(EpisodeRecord),
    Update(UpdateRecord),
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

pub trait Sink {
    fn record(&mut self, record: &Record) -> Result<()>;
}

impl Sink for Vec<Record> {
    fn record(&mut self, record: &Record) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

pub struct MetricsWriter<W: Write> {
    out: W,
}

impl MetricsWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &Header) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufWriter::new(file), header).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W, header: &Header) -> Result<Self> {
        write_line(&mut out, header)?;
        Ok(Self { out })
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io("<metrics>", e))
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Sink for MetricsWriter<W> {
    fn record(&mut self, record: &Record) -> Result<()> {
        write_line(&mut self.out, record)
    }
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let line = serde_json::to_string(value).expect("metrics records serialize");
    writeln!(out, "{line}").map_err(|e| Error::io("<metrics>", e))
}

pub fn parse_metrics(text: &str) -> Result<(Header, Vec<Record>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Schema("missing header line".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| Error::Schema(format!("unreadable header: {e}")))?;
    if header.schema != SCHEMA {
        return Err(Error::Schema(format!("expected schema '{SCHEMA}', found '{}'", header.schema)));
    }
    if header.version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unsupported schema version {} (this build reads version {SCHEMA_VERSION})",
            header.version
        )));
    }
    let records = lines
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Schema(format!("line {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<Record>>>()?;
    Ok((header, records))
}

pub fn read_metrics(path: &Path) -> Result<(Header, Vec<Record>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    parse_metrics(&text).map_err(|e| match e {
        Error::Schema(m) => Error::Schema(format!("{}: {m}", path.display())),
        other => other,
    })
}
