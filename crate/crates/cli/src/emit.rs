// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic table, JSON and manifest output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Floats carry 17 significant digits so every value round-trips exactly.
    fn csv_text(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Column-ordered rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Config(format!("csv encoding failed: {e}"));
        w.write_record(&self.columns).map_err(fail)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv_text)).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Config(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => to_json(self),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("json encoding failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// SHA-256 of the compact JSON encoding of the effective configuration.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("configurations serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: usize,
    /// Per-trial seeds actually fed to the generators.
    pub trial_seeds: Vec<u64>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, config: &T, seed: u64, trial_seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_sha256: config_hash(config),
            seed,
            trials: trial_seeds.len(),
            trial_seeds,
            files: Vec::new(),
        }
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Named outputs of one experiment.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn table(&mut self, stem: &str, table: &Table, format: Format) -> CliResult<()> {
        self.files.push((format!("{stem}.{}", format.extension()), table.render(format)?));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.files.push((name.to_owned(), to_json(value)?));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Writes every file plus `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &Path, mut manifest: Manifest) -> CliResult<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        manifest.files = self.names();
        let mut written = Vec::new();
        for (name, body) in &self.files {
            let p = dir.join(name);
            write_file(&p, body)?;
            written.push(p);
        }
        let p = dir.join("manifest.json");
        write_file(&p, &to_json(&manifest)?)?;
        written.push(p);
        Ok(written)
    }

    /// Everything concatenated, for stdout.
    pub fn to_stdout_text(&self) -> String {
        if self.files.len() == 1 {
            return self.files[0].1.clone();
        }
        self.files.iter().map(|(n, b)| format!("# {n}\n{b}")).collect()
    }
}
