//! Result files: versioned CSV, JSON summaries and a plain-text log.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::stats::MCEstimate;
use crate::Result;

pub const SCHEMA: &str = "loopdecay.v1";

/// Where a number came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    MonteCarlo,
    Oracle,
}

/// One emitted estimate with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRecord<P: Serialize> {
    pub params: P,
    pub n: u64,
    pub seed: u64,
    pub mean: f64,
    pub stderr: f64,
    pub n_eff: Option<f64>,
    pub batches: usize,
    pub source: Source,
}

impl<P: Serialize> EstimateRecord<P> {
    pub fn monte_carlo(params: P, e: &MCEstimate) -> Self {
        EstimateRecord {
            params,
            n: e.n,
            seed: e.seed,
            mean: e.mean,
            stderr: e.stderr,
            n_eff: e.n_eff,
            batches: e.batches,
            source: Source::MonteCarlo,
        }
    }

    pub fn oracle(params: P, value: f64) -> Self {
        EstimateRecord { params, n: 1, seed: 0, mean: value, stderr: 0.0, n_eff: None, batches: 0, source: Source::Oracle }
    }
}

/// CSV table with a `# schema=… seed=…` header line.
pub struct CsvTable {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    notes: Vec<String>,
}

impl CsvTable {
    pub fn new(columns: &[&str]) -> Self {
        CsvTable { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push<I, D>(&mut self, row: I)
    where
        I: IntoIterator<Item = D>,
        D: Display,
    {
        let row: Vec<String> = row.into_iter().map(|d| d.to_string()).collect();
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// Adds a `# key=value` line after the schema header.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.notes.push(format!("{key}={value}"));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write<W: Write>(&self, mut out: W, experiment: &str, seed: u64) -> Result<()> {
        writeln!(out, "# schema={SCHEMA} experiment={experiment} seed={seed}")?;
        for n in &self.notes {
            writeln!(out, "# {n}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }
}

/// A run's output directory. Files are written whole by one writer.
pub struct OutputDir {
    root: PathBuf,
    experiment: String,
    seed: u64,
    log: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path, experiment: &str, seed: u64) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), experiment: experiment.to_string(), seed, log: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn csv(&self, name: &str, table: &CsvTable) -> Result<PathBuf> {
        let path = self.root.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        table.write(&mut w, &self.experiment, self.seed)?;
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.root.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn log(&mut self, line: impl Into<String>) {
        self.log.push(line.into());
    }

    pub fn log_lines(&self) -> &[String] {
        &self.log
    }

    /// Writes `run.log` and returns its path.
    pub fn finish(&self) -> Result<PathBuf> {
        let path = self.root.join("run.log");
        let mut w = BufWriter::new(File::create(&path)?);
        writeln!(w, "experiment={} seed={}", self.experiment, self.seed)?;
        for l in &self.log {
            writeln!(w, "{l}")?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Shortest decimal that round-trips to the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Joins coordinates as `a;b;c` so they fit in one CSV cell.
pub fn fmt_point(x: &[i32]) -> String {
    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}
