// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Quantum estimation and robust control on small dense Hilbert spaces.
//!
//! - [`linalg`]: complex matrix kernels (operator bases, vectorization, exponentials, logs).
//! - [`model`]: states, POVMs, Born-rule probabilities and simulated measurement records.
//! - [`lre`]: batch linear-regression state tomography with physical projection.
//! - [`adaptive`]: recursive regression and trace-gain adaptive measurement selection.
//! - [`ident`]: process tomography and Hamiltonian identification for unitary channels.
//! - [`control`]: sampling-based learning control and the sliding-mode measurement demo.
//! - [`complexity`]: wall-clock scaling probes for the estimators.

pub mod adaptive;
pub mod complexity;
pub mod control;
pub mod error;
pub mod ident;
pub mod linalg;
pub mod lre;
pub mod model;

pub use adaptive::{AdaptiveSchedule, CandidateSet, RecursiveState};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, HermitianBasis, MatrixJson, C64};
pub use lre::{RegressionProblem, TomographyResult, WeightPolicy};
pub use model::{DensityMatrix, MeasurementRecord, Povm, PureState, ThetaVector};
