// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

/// Failure classes with distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration keys or input files.
    #[error("{0}")]
    Config(String),
    /// A numerical contract failed (singular design, degenerate data, ...).
    #[error("{0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// Single-line, machine-parsable form: `error[kind]: message`.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {msg}", self.kind())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<qest_core::Error> for CliError {
    fn from(e: qest_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
