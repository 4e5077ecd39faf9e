//! Output directory, CSV files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// SHA-256 of the effective config echo, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    format!("{:x}", Sha256::digest(cfg.echo().as_bytes()))
}

/// A CSV table collected in memory and written in one piece.
pub struct Csv {
    name: String,
    header: String,
    rows: Vec<String>,
    failed: usize,
}

impl Csv {
    pub fn new(name: &str, header: &str) -> Self {
        Csv {
            name: name.to_string(),
            header: header.to_string(),
            rows: Vec::new(),
            failed: 0,
        }
    }

    pub fn push(&mut self, row: String) {
        self.rows.push(row);
    }

    pub fn push_failed(&mut self, row: String) {
        self.failed += 1;
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn failed(&self) -> usize {
        self.failed
    }
}

/// Written artifact, listed in the manifest.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub file: String,
    pub rows: Option<usize>,
    pub failed: usize,
}

pub struct OutputDir {
    dir: PathBuf,
    seed: u64,
    hash: String,
    artifacts: Vec<Artifact>,
    notes: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, cfg: &ExperimentConfig) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            seed: cfg.seed,
            hash: config_hash(cfg),
            artifacts: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Free-form manifest line, e.g. the message of a failed row.
    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn write_csv(&mut self, csv: &Csv) -> std::io::Result<()> {
        let mut f = fs::File::create(self.path(&csv.name))?;
        writeln!(f, "# seed={} config_hash={}", self.seed, self.hash)?;
        writeln!(f, "{}", csv.header)?;
        for r in &csv.rows {
            writeln!(f, "{r}")?;
        }
        self.artifacts.push(Artifact {
            file: csv.name.clone(),
            rows: Some(csv.len()),
            failed: csv.failed(),
        });
        Ok(())
    }

    /// Writes a file whose body is produced by `body`.
    pub fn write_with(
        &mut self,
        file: &str,
        body: impl FnOnce(&mut fs::File) -> Result<(), lmalab::Error>,
    ) -> Result<(), lmalab::Error> {
        let mut f = fs::File::create(self.path(file))?;
        body(&mut f)?;
        self.artifacts.push(Artifact {
            file: file.to_string(),
            rows: None,
            failed: 0,
        });
        Ok(())
    }

    /// Writes `manifest.txt`: run identity, artifacts, notes and the config echo.
    pub fn write_manifest(&self, subcommand: &str, cfg: &ExperimentConfig, jobs: usize) -> std::io::Result<()> {
        let mut f = fs::File::create(self.path("manifest.txt"))?;
        writeln!(f, "subcommand = {subcommand}")?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "config_hash = {}", self.hash)?;
        writeln!(f, "lmalab_version = {}", lmalab::VERSION)?;
        writeln!(f, "cli_version = {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(f, "jobs = {jobs}")?;
        writeln!(f)?;
        writeln!(f, "[artifacts]")?;
        for a in &self.artifacts {
            match a.rows {
                Some(r) => writeln!(f, "{} rows={} failed={}", a.file, r, a.failed)?,
                None => writeln!(f, "{}", a.file)?,
            }
        }
        if !self.notes.is_empty() {
            writeln!(f)?;
            writeln!(f, "[notes]")?;
            for n in &self.notes {
                writeln!(f, "{n}")?;
            }
        }
        writeln!(f)?;
        writeln!(f, "[config]")?;
        write!(f, "{}", cfg.echo())?;
        Ok(())
    }
}

/// Fixed-precision number formatting for CSV cells.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.10e}")
    }
}
