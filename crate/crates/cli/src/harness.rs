// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Seeded Monte-Carlo experiments behind the CLI commands.
//!
//! Trial `i` of a run with seed `s` draws everything from `derive_seed(s, i)`: the true state
//! from child stream 0, measurements from child stream 1 and test samples from child stream 2.
//! Trials run in parallel and are collected in index order, so output does not depend on the
//! worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qest_core::adaptive::even_allocation;
use qest_core::adaptive::{run_adaptive_protocol, AdaptiveSchedule, CandidateSet, StepDiagnostics};
use qest_core::complexity::loglog_slope;
use qest_core::control::{
    periodic_measurement_demo, rabi_leak_probability, slc_test, slc_train, ControlField, GradientMode, SampleSet,
    SlidingConfig, TestStats, TrainConfig, TrainResult, UncertainSystem,
};
use qest_core::linalg::{pauli_x, pauli_y, pauli_z, CMatrix};
use qest_core::lre::tomography_pipeline;
use qest_core::model::{
    derive_seed, haar_pure_state, mse, random_mixed_state, rng_from_seed, simulate_measurements_with, standard_povms,
    DensityMatrix, PureState,
};
use qest_core::{MatrixJson, WeightPolicy};

use crate::emit::{Cell, Table};
use crate::error::{CliError, CliResult};

/// Seed of trial `trial` in a run seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, trial as u64)
}

pub fn trial_seeds(seed: u64, trials: usize) -> Vec<u64> {
    (0..trials).map(|t| trial_seed(seed, t)).collect()
}

fn check_trials(trials: usize) -> CliResult<()> {
    if trials == 0 {
        return Err(CliError::Config("trials must be at least 1".into()));
    }
    Ok(())
}

/// Distribution of true states.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Ensemble {
    /// Haar-random pure states.
    #[default]
    Pure,
    /// Hilbert–Schmidt random mixed states (normalized Wishart).
    Mixed,
}

pub fn random_truth(d: usize, ensemble: Ensemble, seed: u64) -> DensityMatrix {
    let mut rng = rng_from_seed(seed);
    match ensemble {
        Ensemble::Pure => DensityMatrix::from_pure(&haar_pure_state(d, &mut rng)),
        Ensemble::Mixed => random_mixed_state(d, &mut rng),
    }
}

/// Batch tomography with `copies` split evenly over the standard measurement set.
pub fn static_estimate(
    truth: &DensityMatrix,
    copies: u64,
    weights: WeightPolicy,
    seed: u64,
) -> CliResult<DensityMatrix> {
    let d = truth.dim();
    let basis = qest_core::linalg::gell_mann_basis(d)?;
    let povms = standard_povms(d)?;
    if copies < povms.len() as u64 {
        return Err(CliError::Config(format!("{copies} copies cannot cover {} measurement settings", povms.len())));
    }
    let mut rng = rng_from_seed(seed);
    let mut records = Vec::new();
    for (p, n) in povms.iter().zip(even_allocation(copies, povms.len())) {
        records.extend(simulate_measurements_with(truth, p, &basis, n, &mut rng)?);
    }
    Ok(tomography_pipeline(&records, d, &basis, weights)?.state)
}

// ---------------------------------------------------------------------------------------------
// MSE sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dim: usize,
    /// Total copies `N` per reconstruction.
    pub copies: Vec<u64>,
    #[serde(default)]
    pub ensemble: Ensemble,
    #[serde(default)]
    pub weights: WeightPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub copies: u64,
    pub trial: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub copies: u64,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Log-log slope of mean MSE against `N`.
    pub fn slope(&self) -> CliResult<f64> {
        let xs: Vec<f64> = self.points.iter().map(|p| p.copies as f64).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.mean).collect();
        Ok(loglog_slope(&xs, &ys)?)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["N", "trial", "mse"]);
        for r in &self.rows {
            t.push(vec![r.copies.into(), r.trial.into(), r.mse.into()]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(&["N", "mean", "median", "min"]);
        for p in &self.points {
            t.push(vec![p.copies.into(), p.mean.into(), p.median.into(), p.min.into()]);
        }
        t
    }
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Reconstruction MSE over a grid of `N`. Each trial keeps its true state across the grid.
pub fn run_mse_sweep(config: &SweepConfig, seed: u64, trials: usize) -> CliResult<SweepResult> {
    check_trials(trials)?;
    if config.dim < 2 {
        return Err(CliError::Config(format!("dim: need at least 2, got {}", config.dim)));
    }
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for (k, &n) in config.copies.iter().enumerate() {
        let mses: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, t);
                let truth = random_truth(config.dim, config.ensemble, derive_seed(s, 0));
                let est = static_estimate(&truth, n, config.weights, derive_seed(derive_seed(s, 1), k as u64))?;
                Ok(mse(&est, &truth)?)
            })
            .collect::<CliResult<_>>()?;
        rows.extend(mses.iter().enumerate().map(|(t, &m)| SweepRow { copies: n, trial: t, mse: m }));
        points.push(SweepPoint {
            copies: n,
            mean: mses.iter().sum::<f64>() / trials as f64,
            median: median(&mses),
            min: mses.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }
    Ok(SweepResult { rows, points })
}

// ---------------------------------------------------------------------------------------------
// Adaptive tomography

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    /// The standard measurement set (cube bases on qubit registers).
    #[default]
    Cube,
    /// Any qubit projective measurement.
    Continuum,
}

impl CandidateKind {
    pub fn build(self, d: usize) -> CliResult<CandidateSet> {
        Ok(match self {
            CandidateKind::Cube => CandidateSet::Finite(standard_povms(d)?),
            CandidateKind::Continuum => {
                if d != 2 {
                    return Err(CliError::Config(format!("candidates: continuum needs dim 2, got {d}")));
                }
                CandidateSet::QubitContinuum
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    pub dim: usize,
    pub copies: u64,
    pub stage1: u64,
    pub steps: usize,
    #[serde(default)]
    pub candidates: CandidateKind,
    #[serde(default)]
    pub weights: WeightPolicy,
    #[serde(default)]
    pub ensemble: Ensemble,
}

impl AdaptConfig {
    pub fn schedule(&self) -> CliResult<AdaptiveSchedule> {
        Ok(AdaptiveSchedule::new(self.copies, self.stage1, self.steps)?)
    }
}

#[derive(Debug, Clone)]
pub struct AdaptTrial {
    pub trial: usize,
    pub steps: Vec<StepDiagnostics>,
}

pub fn run_adapt(config: &AdaptConfig, seed: u64, trials: usize) -> CliResult<Vec<AdaptTrial>> {
    check_trials(trials)?;
    let schedule = config.schedule()?;
    let candidates = config.candidates.build(config.dim)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let truth = random_truth(config.dim, config.ensemble, derive_seed(s, 0));
            let run = run_adaptive_protocol(&truth, &schedule, &candidates, config.weights, derive_seed(s, 1))?;
            Ok(AdaptTrial { trial: t, steps: run.steps })
        })
        .collect()
}

pub fn adapt_table(trials: &[AdaptTrial]) -> Table {
    let mut t = Table::new(&["trial", "step", "copies_used", "trace_Q", "mse", "povm"]);
    for tr in trials {
        for s in &tr.steps {
            t.push(vec![
                tr.trial.into(),
                s.step.into(),
                s.copies_used.into(),
                s.trace_q.into(),
                s.mse.into(),
                s.povm.clone().into(),
            ]);
        }
    }
    t
}

// ---------------------------------------------------------------------------------------------
// Control

/// A Hamiltonian given either densely or as a scaled Pauli matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Pauli {
        pauli: char,
        #[serde(default = "one")]
        scale: f64,
    },
    Dense(MatrixJson),
}

fn one() -> f64 {
    1.0
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> CliResult<CMatrix> {
        match self {
            MatrixSpec::Pauli { pauli, scale } => {
                let m = match pauli {
                    'x' => pauli_x(),
                    'y' => pauli_y(),
                    'z' => pauli_z(),
                    'i' => CMatrix::identity(2, 2),
                    other => return Err(CliError::Config(format!("pauli: unknown axis {other:?}"))),
                };
                Ok(m.scale(*scale))
            }
            MatrixSpec::Dense(j) => Ok(j.to_matrix()?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "scheme", rename_all = "lowercase")]
pub enum SampleSpec {
    Grid {
        n_omega: usize,
        n_theta: usize,
    },
    Random {
        n: usize,
        seed: u64,
    },
    /// Four corners plus the centre of the uncertainty rectangle.
    Corners,
}

impl SampleSpec {
    pub fn build(&self, system: &UncertainSystem) -> CliResult<SampleSet> {
        Ok(match *self {
            SampleSpec::Grid { n_omega, n_theta } => SampleSet::grid(system, n_omega, n_theta)?,
            SampleSpec::Random { n, seed } => SampleSet::random(system, n, seed)?,
            SampleSpec::Corners => SampleSet::corners_and_center(system),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientKind {
    #[default]
    Analytic,
    FirstOrder,
    Fd,
}

fn default_fd_step() -> f64 {
    1e-6
}

fn default_target() -> usize {
    1
}

fn default_init_scale() -> f64 {
    0.5
}

/// Everything `qest slc` needs. Matrix keys follow the model's symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlcConfig {
    pub dim: usize,
    #[serde(rename = "H0")]
    pub h0: MatrixSpec,
    #[serde(rename = "Hm")]
    pub hm: Vec<MatrixSpec>,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "L")]
    pub intervals: usize,
    pub omega_halfwidth: f64,
    pub theta_halfwidth: f64,
    pub samples: SampleSpec,
    pub iterations: usize,
    pub step: f64,
    pub tolerance: f64,
    pub test: TestSpec,
    /// Basis index of the initial state.
    #[serde(default)]
    pub initial: usize,
    #[serde(default = "default_target")]
    pub target: usize,
    /// Initial amplitudes are uniform in `[−init_scale, init_scale]`, drawn from the run seed.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
    #[serde(default)]
    pub gradient: GradientKind,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub amplitude_bound: Option<f64>,
}

/// Resolved system, endpoints and training settings.
pub struct SlcSetup {
    pub system: UncertainSystem,
    pub training: SampleSet,
    pub test: SampleSet,
    pub psi0: PureState,
    pub target: PureState,
    pub train: TrainConfig,
}

impl SlcConfig {
    pub fn setup(&self) -> CliResult<SlcSetup> {
        let h0 = self.h0.to_matrix()?;
        if h0.nrows() != self.dim {
            return Err(CliError::Config(format!(
                "H0: expected {0}x{0}, got {1}x{2}",
                self.dim,
                h0.nrows(),
                h0.ncols()
            )));
        }
        let hm = self.hm.iter().map(MatrixSpec::to_matrix).collect::<CliResult<Vec<_>>>()?;
        let system = UncertainSystem::new(h0, hm, self.omega_halfwidth, self.theta_halfwidth)?;
        for (name, k) in [("initial", self.initial), ("target", self.target)] {
            if k >= self.dim {
                return Err(CliError::Config(format!("{name}: basis index {k} out of range for dim {}", self.dim)));
            }
        }
        let gradient = match self.gradient {
            GradientKind::Analytic => GradientMode::Analytic,
            GradientKind::FirstOrder => GradientMode::FirstOrder,
            GradientKind::Fd => GradientMode::FiniteDifference { h: self.fd_step },
        };
        let train = TrainConfig {
            step: self.step,
            iterations: self.iterations,
            tolerance: self.tolerance,
            gradient,
            ..TrainConfig::default()
        };
        Ok(SlcSetup {
            training: self.samples.build(&system)?,
            test: SampleSet::random(&system, self.test.n, self.test.seed)?,
            psi0: PureState::basis(self.dim, self.initial),
            target: PureState::basis(self.dim, self.target),
            system,
            train,
        })
    }

    pub fn initial_field(&self, seed: u64) -> CliResult<ControlField> {
        let mut rng = rng_from_seed(seed);
        let mut f = ControlField::random(self.horizon, self.intervals, self.hm.len(), self.init_scale, &mut rng)?;
        if let Some(b) = self.amplitude_bound {
            f = f.with_bound(b)?;
        }
        Ok(f)
    }
}

pub struct SlcOutcome {
    pub result: TrainResult,
    pub test: TestStats,
}

pub fn run_slc(config: &SlcConfig, seed: u64) -> CliResult<SlcOutcome> {
    let s = config.setup()?;
    let field0 = config.initial_field(seed)?;
    let result = slc_train(&s.system, &s.training, &field0, &s.psi0, &s.target, &s.train)?;
    let test = slc_test(&s.system, &result.field, &s.test, &s.psi0, &s.target)?;
    Ok(SlcOutcome { result, test })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseJson {
    pub horizon: f64,
    pub intervals: usize,
    pub channels: usize,
    /// One row per interval.
    pub amplitudes: Vec<Vec<f64>>,
}

impl PulseJson {
    pub fn from_field(f: &ControlField) -> Self {
        let a = f.amplitudes();
        Self {
            horizon: f.horizon(),
            intervals: f.intervals(),
            channels: f.channels(),
            amplitudes: (0..a.nrows()).map(|k| a.row(k).iter().copied().collect()).collect(),
        }
    }
}

pub fn train_log_table(log: &[f64]) -> Table {
    let mut t = Table::new(&["iter", "JN"]);
    for (i, j) in log.iter().enumerate() {
        t.push(vec![i.into(), (*j).into()]);
    }
    t
}

pub fn test_table(stats: &TestStats) -> Table {
    let mut t = Table::new(&["omega", "theta", "fidelity"]);
    for &(w, th, f) in &stats.per_sample {
        t.push(vec![w.into(), th.into(), f.into()]);
    }
    t
}

// ---------------------------------------------------------------------------------------------
// Paired comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "strategy", rename_all = "lowercase")]
pub enum TomoStrategy {
    Static {
        #[serde(default)]
        weights: WeightPolicy,
    },
    Adaptive {
        stage1: u64,
        steps: usize,
        #[serde(default)]
        candidates: CandidateKind,
        #[serde(default)]
        weights: WeightPolicy,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlStrategy {
    /// Train on the configured samples.
    Robust,
    /// Train on the nominal parameters only.
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CompareConfig {
    /// Lower MSE wins.
    Tomography(TomoCompare),
    /// Higher worst-case test fidelity wins.
    Control(ControlCompare),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoCompare {
    pub dim: usize,
    pub copies: u64,
    #[serde(default)]
    pub ensemble: Ensemble,
    pub a: TomoStrategy,
    pub b: TomoStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlCompare {
    pub system: SlcConfig,
    pub a: ControlStrategy,
    pub b: ControlStrategy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRow {
    pub trial: usize,
    pub a: f64,
    pub b: f64,
    /// `"a"`, `"b"` or `"tie"` (difference within 1e-12).
    pub winner: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSummary {
    pub metric: &'static str,
    pub trials: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// `mean_a / mean_b`.
    pub ratio: f64,
    pub win_rate_a: f64,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedResult {
    pub rows: Vec<PairRow>,
    pub summary: PairedSummary,
}

impl PairedResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["trial", "a", "b", "winner"]);
        for r in &self.rows {
            t.push(vec![r.trial.into(), r.a.into(), r.b.into(), Cell::from(r.winner)]);
        }
        t
    }
}

pub const TIE_TOLERANCE: f64 = 1e-12;

fn tomo_metric(cfg: &TomoCompare, strategy: &TomoStrategy, truth: &DensityMatrix, mseed: u64) -> CliResult<f64> {
    let est = match strategy {
        TomoStrategy::Static { weights } => static_estimate(truth, cfg.copies, *weights, mseed)?,
        TomoStrategy::Adaptive { stage1, steps, candidates, weights } => {
            let schedule = AdaptiveSchedule::new(cfg.copies, *stage1, *steps)?;
            let cands = candidates.build(cfg.dim)?;
            run_adaptive_protocol(truth, &schedule, &cands, *weights, mseed)?.estimate
        }
    };
    Ok(mse(&est, truth)?)
}

fn control_metric(cfg: &SlcConfig, strategy: ControlStrategy, seed: u64) -> CliResult<f64> {
    let s = cfg.setup()?;
    let field0 = cfg.initial_field(derive_seed(seed, 0))?;
    let training = match strategy {
        ControlStrategy::Robust => s.training.clone(),
        ControlStrategy::Nominal => SampleSet::nominal(),
    };
    let trained = slc_train(&s.system, &training, &field0, &s.psi0, &s.target, &s.train)?;
    let test = SampleSet::random(&s.system, cfg.test.n, derive_seed(seed, 2))?;
    Ok(slc_test(&s.system, &trained.field, &test, &s.psi0, &s.target)?.min)
}

/// Both strategies see the same truth, measurement stream and test samples in every trial.
pub fn run_paired_comparison(config: &CompareConfig, seed: u64, trials: usize) -> CliResult<PairedResult> {
    check_trials(trials)?;
    let lower_is_better = matches!(config, CompareConfig::Tomography(_));
    let pairs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            match config {
                CompareConfig::Tomography(cfg) => {
                    let truth = random_truth(cfg.dim, cfg.ensemble, derive_seed(s, 0));
                    let m = derive_seed(s, 1);
                    Ok((tomo_metric(cfg, &cfg.a, &truth, m)?, tomo_metric(cfg, &cfg.b, &truth, m)?))
                }
                CompareConfig::Control(cfg) => {
                    Ok((control_metric(&cfg.system, cfg.a, s)?, control_metric(&cfg.system, cfg.b, s)?))
                }
            }
        })
        .collect::<CliResult<_>>()?;
    let rows: Vec<PairRow> = pairs
        .iter()
        .enumerate()
        .map(|(trial, &(a, b))| {
            let winner = if (a - b).abs() <= TIE_TOLERANCE {
                "tie"
            } else if (a < b) == lower_is_better {
                "a"
            } else {
                "b"
            };
            PairRow { trial, a, b, winner }
        })
        .collect();
    let n = trials as f64;
    let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let wins = rows.iter().filter(|r| r.winner == "a").count();
    let ties = rows.iter().filter(|r| r.winner == "tie").count();
    let summary = PairedSummary {
        metric: if lower_is_better { "mse" } else { "worst_case_fidelity" },
        trials,
        mean_a,
        mean_b,
        ratio: mean_a / mean_b,
        win_rate_a: wins as f64 / n,
        ties,
    };
    Ok(PairedResult { rows, summary })
}

// ---------------------------------------------------------------------------------------------
// Sliding-domain demo

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcConfig {
    pub p0: f64,
    pub eps: f64,
    pub tau: f64,
    pub periods: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmcSummary {
    pub periods: usize,
    pub out_of_domain_collapses: usize,
    pub frequency: f64,
    /// `sin²(ετ)`.
    pub leak_probability: f64,
    /// Binomial standard deviation of the frequency at the closed-form rate.
    pub sigma: f64,
    pub matches_closed_form: bool,
    pub within_p0_bound: bool,
}

pub fn run_smc(config: &SmcConfig, seed: u64) -> CliResult<(Table, SmcSummary)> {
    let sliding = SlidingConfig::new(config.p0, config.tau)?;
    let horizon = config.tau * config.periods as f64;
    let log = periodic_measurement_demo(&pauli_x().scale(config.eps), &sliding, horizon, seed)?;
    let mut t = Table::new(&["period", "pre_p0", "in_domain", "outcome"]);
    for p in &log.periods {
        t.push(vec![p.period.into(), p.pre_p0.into(), p.pre_in_domain.into(), (p.outcome as usize).into()]);
    }
    let n = log.periods.len();
    let leak = rabi_leak_probability(config.eps, config.tau);
    let sigma = if n == 0 { 0.0 } else { (leak * (1.0 - leak) / n as f64).sqrt() };
    let summary = SmcSummary {
        periods: n,
        out_of_domain_collapses: log.out_of_domain_collapses,
        frequency: log.frequency,
        leak_probability: leak,
        sigma,
        matches_closed_form: (log.frequency - leak).abs() <= 3.0 * sigma + f64::EPSILON,
        within_p0_bound: log.frequency <= config.p0 + 3.0 * sigma,
    };
    Ok((t, summary))
}
