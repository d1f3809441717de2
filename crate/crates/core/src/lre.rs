// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Batch linear-regression state tomography.
//!
//! Each measured POVM element `E` contributes one regression row
//! `p̂(E) − γ₀/d = Γᵀ Θ + e`. The weighted least-squares estimate of `Θ` is mapped back to a
//! unit-trace Hermitian matrix and then projected onto the density matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, frobenius, hermitize, is_hermitian, spectral_compose, trace, CMatrix};
use crate::model::{rho_from_theta, DensityMatrix, MeasurementRecord, ThetaVector};
use crate::HermitianBasis;

/// Designs whose `√W X` has condition number above this are reported as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// How each regression row is weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPolicy {
    /// `W = n`, the number of shots behind the frequency.
    #[default]
    Shots,
    /// `W = n / (p̂ (1 − p̂))` with `p̂` clipped to `[1/(2n), 1 − 1/(2n)]`.
    #[serde(rename = "invvar")]
    InverseVariance,
}

impl WeightPolicy {
    pub fn weight(self, shots: u64, frequency: f64) -> f64 {
        let n = shots as f64;
        match self {
            WeightPolicy::Shots => n,
            WeightPolicy::InverseVariance => {
                let lo = 1.0 / (2.0 * n);
                let p = frequency.clamp(lo, 1.0 - lo);
                n / (p * (1.0 - p))
            }
        }
    }
}

impl std::str::FromStr for WeightPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shots" => Ok(WeightPolicy::Shots),
            "invvar" => Ok(WeightPolicy::InverseVariance),
            other => Err(Error::InvalidArgument(format!("unknown weight policy {other:?}"))),
        }
    }
}

/// `Y = X Θ + e` with per-row weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub dim: usize,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub w: DVector<f64>,
}

impl RegressionProblem {
    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn params(&self) -> usize {
        self.x.ncols()
    }

    /// Information matrix `Xᵀ W X`.
    pub fn information(&self) -> DMatrix<f64> {
        let mut scaled = self.x.clone();
        for (mut row, &w) in scaled.row_iter_mut().zip(self.w.iter()) {
            row *= w;
        }
        self.x.transpose() * scaled
    }

    /// `‖√W (Y − X Θ)‖`.
    pub fn weighted_residual(&self, theta: &ThetaVector) -> f64 {
        let t = DVector::from_column_slice(&theta.values);
        let r = &self.y - &self.x * t;
        r.iter().zip(self.w.iter()).map(|(r, w)| w * r * r).sum::<f64>().sqrt()
    }
}

/// Assembles the regression from counted records (`p̂ = n₁ / n`).
pub fn build_regression(
    records: &[MeasurementRecord],
    d: usize,
    basis: &HermitianBasis,
    policy: WeightPolicy,
) -> Result<RegressionProblem> {
    let rows: Vec<(&MeasurementRecord, f64)> = records.iter().map(|r| (r, r.frequency())).collect();
    build_rows(&rows, d, basis, policy)
}

/// Assembles the regression with explicitly supplied frequencies, e.g. exact probabilities.
pub fn build_regression_with_frequencies(
    observations: &[(MeasurementRecord, f64)],
    d: usize,
    basis: &HermitianBasis,
    policy: WeightPolicy,
) -> Result<RegressionProblem> {
    let rows: Vec<(&MeasurementRecord, f64)> = observations.iter().map(|(r, p)| (r, *p)).collect();
    build_rows(&rows, d, basis, policy)
}

fn build_rows(
    rows: &[(&MeasurementRecord, f64)],
    d: usize,
    basis: &HermitianBasis,
    policy: WeightPolicy,
) -> Result<RegressionProblem> {
    if rows.is_empty() {
        return Err(Error::EmptyProblem("no measurement records".into()));
    }
    if basis.dim() != d {
        return Err(Error::DimensionMismatch(format!("basis dimension {} vs d = {d}", basis.dim())));
    }
    let p = basis.len();
    let m = rows.len();
    let mut x = DMatrix::zeros(m, p);
    let mut y = DVector::zeros(m);
    let mut w = DVector::zeros(m);
    for (j, (rec, freq)) in rows.iter().enumerate() {
        if rec.shots == 0 {
            return Err(Error::InvalidArgument(format!("record {}:{} has zero shots", rec.povm, rec.element)));
        }
        if rec.gamma.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "record {}:{} has {} coordinates, expected {p}",
                rec.povm,
                rec.element,
                rec.gamma.len()
            )));
        }
        y[j] = freq - rec.gamma0 / d as f64;
        for (i, g) in rec.gamma.iter().enumerate() {
            x[(j, i)] = *g;
        }
        w[j] = policy.weight(rec.shots, *freq);
    }
    Ok(RegressionProblem { dim: d, y, x, w })
}

/// Weighted least-squares solution with conditioning information.
#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub theta: ThetaVector,
    pub condition_number: f64,
}

/// `Θ̂ = argmin Σ W (Y − X Θ)²`, solved through a QR factorization of `√W X`.
pub fn solve_weighted_ls(problem: &RegressionProblem) -> Result<ThetaVector> {
    solve_weighted_ls_detailed(problem).map(|s| s.theta)
}

pub fn solve_weighted_ls_detailed(problem: &RegressionProblem) -> Result<WlsSolution> {
    let (m, p) = (problem.rows(), problem.params());
    if m == 0 {
        return Err(Error::EmptyProblem("no regression rows".into()));
    }
    if problem.w.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    let sqrt_w: Vec<f64> = problem.w.iter().map(|w| w.sqrt()).collect();
    let mut a = problem.x.clone();
    for (mut row, s) in a.row_iter_mut().zip(&sqrt_w) {
        row *= *s;
    }
    let b = DVector::from_iterator(m, problem.y.iter().zip(&sqrt_w).map(|(y, s)| y * s));

    if m < p {
        let sv = a.svd(false, false).singular_values;
        let rank = numerical_rank(sv.as_slice());
        return Err(Error::SingularDesign { nullity: p - rank, params: p });
    }

    let qr = a.qr();
    let r = qr.r();
    let sv = r.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition_number <= MAX_CONDITION) {
        let rank = numerical_rank(sv.as_slice());
        return Err(Error::SingularDesign { nullity: (p - rank).max(1), params: p });
    }
    let rhs = qr.q().transpose() * b;
    let theta = r.solve_upper_triangular(&rhs).ok_or(Error::SingularDesign { nullity: 1, params: p })?;
    Ok(WlsSolution { theta: ThetaVector { dim: problem.dim, values: theta.as_slice().to_vec() }, condition_number })
}

fn numerical_rank(sv: &[f64]) -> usize {
    let smax = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > smax / MAX_CONDITION).count()
}

/// The weighted least-squares map `Y ↦ (XᵀWX)⁻¹XᵀW Y` for a fixed design and weights.
///
/// With shot-proportional weights the map depends only on the measurement plan, so it can be
/// factored once and applied to every dataset in `O(M·p)`.
#[derive(Debug, Clone)]
pub struct LinearEstimator {
    dim: usize,
    operator: DMatrix<f64>,
}

impl LinearEstimator {
    pub fn new(problem: &RegressionProblem) -> Result<Self> {
        // Same rank and conditioning checks as the direct solver.
        solve_weighted_ls_detailed(problem)?;
        let p = problem.params();
        let chol =
            nalgebra::Cholesky::new(problem.information()).ok_or(Error::SingularDesign { nullity: 1, params: p })?;
        let mut xtw = problem.x.transpose();
        for (mut col, &w) in xtw.column_iter_mut().zip(problem.w.iter()) {
            col *= w;
        }
        Ok(Self { dim: problem.dim, operator: chol.solve(&xtw) })
    }

    pub fn rows(&self) -> usize {
        self.operator.ncols()
    }

    pub fn apply(&self, y: &DVector<f64>) -> Result<ThetaVector> {
        if y.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!("expected {} observations, got {}", self.rows(), y.len())));
        }
        Ok(ThetaVector { dim: self.dim, values: (&self.operator * y).as_slice().to_vec() })
    }
}

/// Euclidean projection of a real vector onto the probability simplex, by zeroing the most
/// negative entries and spreading the deficit uniformly over the rest.
///
/// Entries are processed in descending order; the output keeps the input's order.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let mut out = sorted.clone();
    let mut deficit = 0.0;
    let mut keep = n;
    while keep > 0 {
        let i = keep - 1;
        if sorted[i] + deficit / keep as f64 >= 0.0 {
            break;
        }
        deficit += sorted[i];
        out[i] = 0.0;
        keep -= 1;
    }
    for v in out.iter_mut().take(keep) {
        *v += deficit / keep as f64;
    }
    let mut result = vec![0.0; n];
    for (pos, &k) in order.iter().enumerate() {
        result[k] = out[pos];
    }
    result
}

/// Closest density matrix to a unit-trace Hermitian `ρ̃` with the same eigenvectors.
///
/// Returns the projected state and whether any eigenvalue changed.
pub fn project_physical(rho_tilde: &CMatrix) -> Result<(DensityMatrix, bool)> {
    if !is_hermitian(rho_tilde, 1e-8) {
        return Err(Error::ContractViolation("project_physical needs a Hermitian input".into()));
    }
    let tr = trace(rho_tilde);
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::ContractViolation(format!("project_physical needs unit trace, got {tr}")));
    }
    let (vals, vecs) = eigh(&hermitize(rho_tilde));
    // Mild renormalization keeps the projected trace at exactly one.
    let shift = (1.0 - vals.iter().sum::<f64>()) / vals.len() as f64;
    let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
    if shifted.iter().all(|&v| v >= 0.0) {
        return Ok((DensityMatrix::new_unchecked(hermitize(rho_tilde)), false));
    }
    let projected = project_simplex(&shifted);
    let lambda: Vec<_> = projected.iter().map(|&v| c(v, 0.0)).collect();
    let rho = hermitize(&spectral_compose(&lambda, &vecs));
    Ok((DensityMatrix::new_unchecked(rho), true))
}

/// Per-run diagnostics of [`tomography_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyDiagnostics {
    pub rows: usize,
    pub residual_norm: f64,
    pub condition_number: f64,
    pub projection_changed: bool,
    /// `‖ρ̂ − ρ̃‖_F`.
    pub projection_distance: f64,
}

#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub state: DensityMatrix,
    pub theta: ThetaVector,
    pub diagnostics: TomographyDiagnostics,
}

/// Records → regression → weighted LS → `ρ̃` → physical `ρ̂`.
pub fn tomography_pipeline(
    records: &[MeasurementRecord],
    d: usize,
    basis: &HermitianBasis,
    policy: WeightPolicy,
) -> Result<TomographyResult> {
    let problem = build_regression(records, d, basis, policy)?;
    reconstruct(&problem, basis)
}

/// Runs the solve and projection stages on an assembled problem.
pub fn reconstruct(problem: &RegressionProblem, basis: &HermitianBasis) -> Result<TomographyResult> {
    let sol = solve_weighted_ls_detailed(problem)?;
    let rho_tilde = rho_from_theta(&sol.theta, basis)?;
    let (state, changed) = project_physical(&rho_tilde)?;
    let diagnostics = TomographyDiagnostics {
        rows: problem.rows(),
        residual_norm: problem.weighted_residual(&sol.theta),
        condition_number: sol.condition_number,
        projection_changed: changed,
        projection_distance: frobenius(&(state.matrix() - &rho_tilde)),
    };
    Ok(TomographyResult { state, theta: sol.theta, diagnostics })
}
