//! Output files. Every artifact is named after the scenario digest and every
//! JSONL record carries it in full.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fields shared by every JSONL record.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub record: &'static str,
    pub command: &'static str,
    pub digest: String,
    pub version: &'static str,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Record<T: Serialize> {
    #[serde(flatten)]
    pub header: Header,
    #[serde(flatten)]
    pub body: T,
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: PathBuf,
    digest: String,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path, digest: &str) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            digest: digest.to_string(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}-{}.{ext}", &self.digest[..16]))
    }

    pub fn written(&self) -> Vec<String> {
        self.written.iter().map(|p| p.display().to_string()).collect()
    }

    /// The canonical config the digest was computed from.
    pub fn write_config(&mut self, canonical: &str) -> Result<PathBuf> {
        let path = self.path("config", "json");
        std::fs::write(&path, format!("{canonical}\n")).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// One JSON object per line. Refuses records from another scenario.
    pub fn write_jsonl<T: Serialize>(&mut self, stem: &str, records: &[Record<T>]) -> Result<PathBuf> {
        let values = records
            .iter()
            .map(serde_json::to_value)
            .collect::<Result<Vec<_>, _>>()?;
        check_single_digest(&values, Some(&self.digest))?;
        let path = self.path(stem, "jsonl");
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
        for v in &values {
            serde_json::to_writer(&mut w, v)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Header row plus one row per item.
    pub fn write_csv<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<PathBuf> {
        let path = self.path(stem, "csv");
        let mut w = csv::WriterBuilder::new()
            .has_headers(true)
            .from_path(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Like [`Artifacts::write_csv`] for rows without a serde shape.
    pub fn write_csv_raw(&mut self, stem: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<PathBuf> {
        let path = self.path(stem, "csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// All records must carry the same `digest`, equal to `expected` when given.
pub fn check_single_digest(records: &[Value], expected: Option<&str>) -> Result<String> {
    let mut seen: Option<&str> = expected;
    for (k, r) in records.iter().enumerate() {
        let Some(d) = r.get("digest").and_then(Value::as_str) else {
            bail!("record {k} has no scenario digest");
        };
        match seen {
            Some(s) if s != d => bail!("record {k} belongs to scenario {d}, expected {s}"),
            _ => seen = Some(d),
        }
    }
    seen.map(str::to_string).context("no records")
}
