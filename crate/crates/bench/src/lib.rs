// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures for the benchmarks.

use qest_core::ident::{estimate_lambda, natural_state_basis, KrausSet, LambdaMode, TransferMatrix};
use qest_core::linalg::gell_mann_basis;
use qest_core::lre::{build_regression_with_frequencies, RegressionProblem, WeightPolicy};
use qest_core::model::{exact_records, haar_unitary, random_mixed_state, rng_from_seed, standard_povms};
use qest_core::Result;

/// Exact-probability regression over the standard measurement set of a random mixed state.
pub fn regression_fixture(d: usize, seed: u64) -> Result<RegressionProblem> {
    let mut rng = rng_from_seed(seed);
    let basis = gell_mann_basis(d)?;
    let rho = random_mixed_state(d, &mut rng);
    let mut data = Vec::new();
    for p in standard_povms(d)? {
        data.extend(exact_records(&rho, &p, &basis, 1000)?);
    }
    build_regression_with_frequencies(&data, d, &basis, WeightPolicy::Shots)
}

/// Noiseless transfer matrix of a Haar-random unitary channel.
pub fn lambda_fixture(d: usize, seed: u64) -> Result<TransferMatrix> {
    let mut rng = rng_from_seed(seed);
    let nb = natural_state_basis(d)?;
    estimate_lambda(&KrausSet::unitary(haar_unitary(d, &mut rng))?, &nb, LambdaMode::Noiseless)
}
