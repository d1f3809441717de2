// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Wall-time scaling probes for the batch solver and Hamiltonian identification.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ident::{build_b_natural, estimate_lambda, identify_hamiltonian, natural_state_basis, KrausSet, LambdaMode};
use crate::linalg::gell_mann_basis;
use crate::lre::{build_regression_with_frequencies, solve_weighted_ls, LinearEstimator, WeightPolicy};
use crate::model::{exact_records, haar_unitary, random_mixed_state, rng_from_seed, standard_povms};

/// Which stage to time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeTarget {
    /// Weighted least squares on a complete standard-basis design, factorized per call.
    LreSolve,
    /// Application of a [`LinearEstimator`] factored once for the design.
    LreApply,
    /// [`identify_hamiltonian`] on an exact transfer matrix.
    Identification,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub dim: usize,
    /// Median over repetitions.
    pub seconds: f64,
    pub min_seconds: f64,
    pub max_seconds: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times the inner call `repetitions` times per dimension; inputs are prepared outside the clock.
///
/// Calls shorter than a millisecond are batched so that each sample spans at least that long.
pub fn complexity_probe(target: ProbeTarget, dims: &[usize], repetitions: usize) -> Result<Vec<ProbeRow>> {
    if repetitions == 0 {
        return Err(Error::InvalidArgument("repetitions must be at least 1".into()));
    }
    let mut rng = rng_from_seed(0x5eed);
    let mut rows = Vec::with_capacity(dims.len());
    for &d in dims {
        let mut job: Box<dyn FnMut() -> Result<()>> = match target {
            ProbeTarget::LreSolve | ProbeTarget::LreApply => {
                let basis = gell_mann_basis(d)?;
                let rho = random_mixed_state(d, &mut rng);
                let mut data = Vec::new();
                for p in standard_povms(d)? {
                    data.extend(exact_records(&rho, &p, &basis, 1000)?);
                }
                let problem = build_regression_with_frequencies(&data, d, &basis, WeightPolicy::Shots)?;
                if target == ProbeTarget::LreSolve {
                    Box::new(move || solve_weighted_ls(&problem).map(drop))
                } else {
                    let estimator = LinearEstimator::new(&problem)?;
                    Box::new(move || estimator.apply(&problem.y).map(drop))
                }
            }
            ProbeTarget::Identification => {
                let nb = natural_state_basis(d)?;
                let u = haar_unitary(d, &mut rng);
                let lambda = estimate_lambda(&KrausSet::unitary(u)?, &nb, LambdaMode::Noiseless)?;
                let b = build_b_natural(d);
                Box::new(move || identify_hamiltonian(&lambda, &b, 1.0).map(drop))
            }
        };
        let start = Instant::now();
        job()?;
        let single = start.elapsed().as_secs_f64();
        let batch = ((1e-3 / single.max(1e-9)).ceil() as usize).clamp(1, 10_000);
        let mut samples = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let start = Instant::now();
            for _ in 0..batch {
                job()?;
            }
            samples.push(start.elapsed().as_secs_f64() / batch as f64);
        }
        let min_seconds = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let max_seconds = samples.iter().copied().fold(0.0, f64::max);
        rows.push(ProbeRow { dim: d, seconds: median(samples), min_seconds, max_seconds });
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("need at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Slope of a probe table.
pub fn probe_slope(rows: &[ProbeRow]) -> Result<f64> {
    let xs: Vec<f64> = rows.iter().map(|r| r.dim as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    loglog_slope(&xs, &ys)
}
