// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Experiment harness and command-line front end for `qest-core`.

pub mod commands;
pub mod emit;
pub mod error;
pub mod harness;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
