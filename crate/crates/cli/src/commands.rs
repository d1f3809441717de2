// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Argument parsing and command dispatch.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use qest_core::ident::{
    build_b_natural, estimate_lambda, identify_hamiltonian, natural_state_basis, KrausSet, LambdaMode,
};
use qest_core::linalg::{frobenius, gell_mann_basis, herm_expm, identity, is_hermitian, trace, CMatrix};
use qest_core::lre::{tomography_pipeline, TomographyDiagnostics};
use qest_core::model::{resolve_povm, MeasurementRecord};
use qest_core::{MatrixJson, WeightPolicy};

use crate::emit::{to_json, write_file, Format, Manifest, Outputs};
use crate::error::{CliError, CliResult};
use crate::harness::{
    adapt_table, run_adapt, run_mse_sweep, run_paired_comparison, run_slc, run_smc, test_table, train_log_table,
    trial_seeds, AdaptConfig, CandidateKind, CompareConfig, Ensemble, PulseJson, SlcConfig, SmcConfig, SweepConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "qest",
    version,
    about = "Quantum state tomography, Hamiltonian identification and robust control experiments"
)]
pub struct Cli {
    /// Master seed; per-trial seeds are derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of Monte-Carlo trials.
    #[arg(long, global = true, default_value_t = 1)]
    pub trials: usize,
    /// Output file (tomo, hamid) or directory (other commands); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct a state from a records CSV (povm,element,shots,successes).
    Tomo(TomoArgs),
    /// Adaptive two-stage tomography on random true states.
    Adapt(AdaptArgs),
    /// Identify a Hamiltonian from simulated process tomography of exp(-iHt).
    Hamid(HamidArgs),
    /// Train and test a sampling-based robust control.
    Slc(ConfigArgs),
    /// Periodic σz measurements of a qubit drifting under eps·σx.
    SmcDemo(SmcArgs),
    /// MSE against the number of copies.
    Sweep(ConfigArgs),
    /// Paired comparison of two strategies.
    Compare(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct TomoArgs {
    /// Records CSV with header povm,element,shots,successes.
    #[arg(long)]
    pub records: PathBuf,
    /// Hilbert-space dimension.
    #[arg(long)]
    pub dim: usize,
    /// Regression weights: `shots` or `invvar`.
    #[arg(long, default_value = "shots")]
    pub weights: WeightPolicy,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Total copies per trial.
    #[arg(long = "N")]
    pub copies: u64,
    /// Copies spent on the first, static stage.
    #[arg(long = "N1")]
    pub stage1: u64,
    /// Number of adaptive steps sharing the remaining copies.
    #[arg(long = "K")]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = CandidateKind::Cube)]
    pub candidates: CandidateKind,
    #[arg(long, default_value = "shots")]
    pub weights: WeightPolicy,
    #[arg(long, value_enum, default_value_t = Ensemble::Pure)]
    pub ensemble: Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Noiseless,
    Count(u64),
}

impl std::str::FromStr for Shots {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "noiseless" {
            return Ok(Shots::Noiseless);
        }
        match s.parse::<u64>() {
            Ok(n) if n > 0 => Ok(Shots::Count(n)),
            _ => Err(format!("expected a positive integer or \"noiseless\", got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct HamidArgs {
    #[arg(long)]
    pub dim: usize,
    /// Evolution time t > 0.
    #[arg(long)]
    pub time: f64,
    /// True Hamiltonian as matrix JSON.
    #[arg(long = "true-h")]
    pub true_h: PathBuf,
    /// Copies per measurement setting for every probe output, or `noiseless`.
    #[arg(long, default_value = "noiseless")]
    pub shots: Shots,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct SmcArgs {
    /// Lower bound on the |0⟩ population defining the sliding domain.
    #[arg(long)]
    pub p0: f64,
    /// Drift strength of the eps·σx perturbation.
    #[arg(long)]
    pub eps: f64,
    /// Measurement period.
    #[arg(long)]
    pub tau: f64,
    /// Number of measurement periods to simulate.
    #[arg(long)]
    pub periods: usize,
}

/// What a command produced: text for stdout when no `--out` was given.
pub type Stdout = Option<String>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

/// Writes a directory of outputs with a manifest, or returns them for stdout.
fn finish<T: Serialize>(cli: &Cli, command: &str, config: &T, trials: usize, outputs: Outputs) -> CliResult<Stdout> {
    #[derive(Serialize)]
    struct Effective<'a, T> {
        command: &'a str,
        seed: u64,
        trials: usize,
        config: &'a T,
    }
    let effective = Effective { command, seed: cli.seed, trials, config };
    match &cli.out {
        Some(dir) => {
            let manifest = Manifest::new(command, &effective, cli.seed, trial_seeds(cli.seed, trials));
            outputs.write_dir(dir, manifest)?;
            Ok(None)
        }
        None => Ok(Some(outputs.to_stdout_text())),
    }
}

fn single_file(cli: &Cli, body: String) -> CliResult<Stdout> {
    match &cli.out {
        Some(path) => {
            write_file(path, &body)?;
            Ok(None)
        }
        None => Ok(Some(body)),
    }
}

pub fn run(cli: &Cli) -> CliResult<Stdout> {
    match &cli.command {
        Command::Tomo(a) => tomo(cli, a),
        Command::Adapt(a) => {
            let config = AdaptConfig {
                dim: a.dim,
                copies: a.copies,
                stage1: a.stage1,
                steps: a.steps,
                candidates: a.candidates,
                weights: a.weights,
                ensemble: a.ensemble,
            };
            let trials = run_adapt(&config, cli.seed, cli.trials)?;
            let mut out = Outputs::default();
            out.table("steps", &adapt_table(&trials), cli.format)?;
            finish(cli, "adapt", &config, cli.trials, out)
        }
        Command::Hamid(a) => hamid(cli, a),
        Command::Slc(a) => {
            let config: SlcConfig = load_toml(&a.config)?;
            let outcome = run_slc(&config, cli.seed)?;
            #[derive(Serialize)]
            struct Summary {
                train_jn: f64,
                test_mean: f64,
                test_min: f64,
                iterations: usize,
                stop: qest_core::control::StopReason,
            }
            let summary = Summary {
                train_jn: *outcome.result.log.last().expect("log starts with the initial value"),
                test_mean: outcome.test.mean,
                test_min: outcome.test.min,
                iterations: outcome.result.log.len() - 1,
                stop: outcome.result.stop,
            };
            let mut out = Outputs::default();
            out.table("train_log", &train_log_table(&outcome.result.log), cli.format)?;
            out.table("test", &test_table(&outcome.test), cli.format)?;
            out.json("pulse.json", &PulseJson::from_field(&outcome.result.field))?;
            out.json("summary.json", &summary)?;
            finish(cli, "slc", &config, 1, out)
        }
        Command::SmcDemo(a) => {
            let config = SmcConfig { p0: a.p0, eps: a.eps, tau: a.tau, periods: a.periods };
            let (table, summary) = run_smc(&config, cli.seed)?;
            let mut out = Outputs::default();
            out.table("periods", &table, cli.format)?;
            out.json("summary.json", &summary)?;
            finish(cli, "smc-demo", &config, 1, out)
        }
        Command::Sweep(a) => {
            let config: SweepConfig = load_toml(&a.config)?;
            let result = run_mse_sweep(&config, cli.seed, cli.trials)?;
            let mut out = Outputs::default();
            out.table("sweep", &result.table(), cli.format)?;
            out.table("summary", &result.summary_table(), cli.format)?;
            finish(cli, "sweep", &config, cli.trials, out)
        }
        Command::Compare(a) => {
            let config: CompareConfig = load_toml(&a.config)?;
            let result = run_paired_comparison(&config, cli.seed, cli.trials)?;
            let mut out = Outputs::default();
            out.table("pairs", &result.table(), cli.format)?;
            out.json("summary.json", &result.summary)?;
            finish(cli, "compare", &config, cli.trials, out)
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordRow {
    povm: String,
    element: usize,
    shots: u64,
    successes: u64,
}

/// Parses `povm,element,shots,successes` rows and resolves each POVM label for dimension `d`.
pub fn read_records(text: &str, d: usize) -> CliResult<Vec<MeasurementRecord>> {
    let basis = gell_mann_basis(d)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (line, row) in reader.deserialize::<RecordRow>().enumerate() {
        let row = row.map_err(|e| CliError::Config(format!("records line {}: {e}", line + 2)))?;
        let povm = resolve_povm(&row.povm, d)?;
        let element = povm.elements().get(row.element).ok_or_else(|| {
            CliError::Config(format!("records line {}: POVM {} has no element {}", line + 2, row.povm, row.element))
        })?;
        if row.successes > row.shots {
            return Err(CliError::Config(format!("records line {}: successes exceed shots", line + 2)));
        }
        out.push(MeasurementRecord::for_element(&row.povm, row.element, element, &basis, row.shots, row.successes)?);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct TomoOutput {
    state: MatrixJson,
    theta: Vec<f64>,
    diagnostics: TomographyDiagnostics,
}

fn tomo(cli: &Cli, a: &TomoArgs) -> CliResult<Stdout> {
    let records = read_records(&read_text(&a.records)?, a.dim)?;
    let basis = gell_mann_basis(a.dim)?;
    let result = tomography_pipeline(&records, a.dim, &basis, a.weights)?;
    let body = to_json(&TomoOutput {
        state: MatrixJson::from_matrix(result.state.matrix()).with_label("rho"),
        theta: result.theta.values,
        diagnostics: result.diagnostics,
    })?;
    single_file(cli, body)
}

#[derive(Debug, Serialize)]
struct HamidOutput {
    hamiltonian: MatrixJson,
    rank1_dominance: f64,
    unitary_fit_distance: f64,
    branch_ambiguous: bool,
    /// Frobenius distance to the traceless part of the true Hamiltonian.
    recovery_error: f64,
}

fn hamid(cli: &Cli, a: &HamidArgs) -> CliResult<Stdout> {
    let spec: MatrixJson = serde_json::from_str(&read_text(&a.true_h)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.true_h.display())))?;
    let h = spec.to_matrix()?;
    if h.nrows() != a.dim || h.ncols() != a.dim {
        return Err(CliError::Config(format!("true-h: expected {0}x{0}, got {1}x{2}", a.dim, h.nrows(), h.ncols())));
    }
    if !is_hermitian(&h, 1e-10) {
        return Err(CliError::Config("true-h: matrix is not Hermitian".into()));
    }
    let channel = KrausSet::unitary(herm_expm(&h, a.time)?)?;
    let nb = natural_state_basis(a.dim)?;
    let mode = match a.shots {
        Shots::Noiseless => LambdaMode::Noiseless,
        Shots::Count(shots) => LambdaMode::Sampled { shots, seed: cli.seed },
    };
    let lambda = estimate_lambda(&channel, &nb, mode)?;
    let est = identify_hamiltonian(&lambda, &build_b_natural(a.dim), a.time)?;
    let traceless: CMatrix = &h - identity(a.dim) * (trace(&h) / a.dim as f64);
    let body = to_json(&HamidOutput {
        recovery_error: frobenius(&(&est.hamiltonian - traceless)),
        hamiltonian: MatrixJson::from_matrix(&est.hamiltonian).with_label("H"),
        rank1_dominance: est.rank1_dominance,
        unitary_fit_distance: est.unitary_fit_distance,
        branch_ambiguous: est.branch_ambiguous,
    })?;
    single_file(cli, body)
}
