// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Process tomography and Hamiltonian identification for unitary channels.
//!
//! Conventions. Matrix units are indexed row-major: unit `j = a·d + b` is `|a⟩⟨b|`. They serve
//! both as the operator basis `{Fⱼ}` that expands Kraus operators and as the algebraic input
//! basis `{ρₘ}`. The process matrix `X` (entries `x_jk`) and the transfer matrix `Λ` (entries
//! `λ_mn`, row = input) are `d² × d²`, and the B-matrix acts on their column-stacked
//! vectorizations: row `(m, n) ↦ n·d² + m`, column `(j, k) ↦ k·d² + j`.
//!
//! For a single Kraus operator `A` this gives `X = vec(G) vec(G)†` with `G = Aᵀ`, so a unitary
//! channel `ρ ↦ e^{−iHt} ρ e^{iHt}` is recovered through `e^{−iĤt} = Ĝᵀ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, eigh, frobenius, gell_mann_basis, hermitize, identity, is_square, nearest_unitary, unitary_log, vec, vec_inv,
    CMatrix, CVector, C64, ONE,
};
use crate::lre::{tomography_pipeline, WeightPolicy};
use crate::model::{derive_seed, rng_from_seed, simulate_measurements_with, standard_povms, DensityMatrix};

/// Kraus operators of a trace-preserving channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    dim: usize,
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(Error::InvalidArgument("a channel needs at least one Kraus operator".into()));
        };
        let d = first.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for a in &operators {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::DimensionMismatch("Kraus operators differ in shape".into()));
            }
            sum += a.adjoint() * a;
        }
        if frobenius(&(sum - identity(d))) > 1e-9 {
            return Err(Error::ContractViolation("Kraus operators do not satisfy the completeness relation".into()));
        }
        Ok(Self { dim: d, operators })
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// `Σ Aᵢ M Aᵢ†` for any `d × d` matrix `M`.
    pub fn apply_linear(&self, m: &CMatrix) -> CMatrix {
        self.operators.iter().fold(CMatrix::zeros(self.dim, self.dim), |acc, a| acc + a * m * a.adjoint())
    }
}

/// `ε(ρ) = Σ Aᵢ ρ Aᵢ†`.
pub fn apply_channel(kraus: &KrausSet, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != kraus.dim() {
        return Err(Error::DimensionMismatch(format!(
            "channel dimension {} vs state dimension {}",
            kraus.dim(),
            rho.dim()
        )));
    }
    Ok(DensityMatrix::new_unchecked(hermitize(&kraus.apply_linear(rho.matrix()))))
}

/// Process matrix built directly from Kraus operators: `x_jk = Σᵢ c_ij c_ik*` with
/// `c_ij = (Aᵢ)_{ab}` for `j = a·d + b`.
pub fn process_matrix_from_kraus(kraus: &KrausSet) -> CMatrix {
    let d = kraus.dim();
    let mut x = CMatrix::zeros(d * d, d * d);
    for a in kraus.operators() {
        let g = vec(&a.transpose());
        x += &g * g.adjoint();
    }
    x
}

/// Matrix unit `|a⟩⟨b|` for row-major index `j = a·d + b`.
pub fn matrix_unit(d: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(j / d, j % d)] = ONE;
    m
}

/// Matrix units plus a physical probe set and the exact linear map between them.
#[derive(Debug, Clone)]
pub struct NaturalBasis {
    pub dim: usize,
    /// `d²` matrix units, row-major.
    pub units: Vec<CMatrix>,
    /// `|k⟩⟨k|`, then `(|j⟩+|k⟩)/√2` and then `(|j⟩+i|k⟩)/√2` projectors for `j < k`.
    pub probes: Vec<DensityMatrix>,
    /// Row `m` holds the matrix-unit coefficients of probe `m`.
    pub probe_to_units: CMatrix,
    /// Inverse of `probe_to_units`: row `n` expresses unit `n` through the probes.
    pub units_from_probes: CMatrix,
}

pub fn natural_state_basis(d: usize) -> Result<NaturalBasis> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d >= 2, got {d}")));
    }
    let units: Vec<CMatrix> = (0..d * d).map(|j| matrix_unit(d, j)).collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut vectors: Vec<CVector> = (0..d)
        .map(|k| {
            let mut v = CVector::zeros(d);
            v[k] = ONE;
            v
        })
        .collect();
    for rel in [c(s, 0.0), c(0.0, s)] {
        for j in 0..d {
            for k in (j + 1)..d {
                let mut v = CVector::zeros(d);
                v[j] = c(s, 0.0);
                v[k] = rel;
                vectors.push(v);
            }
        }
    }
    let probes: Vec<DensityMatrix> = vectors.iter().map(|v| DensityMatrix::new_unchecked(v * v.adjoint())).collect();
    let n = d * d;
    let probe_to_units = CMatrix::from_fn(n, n, |m, j| probes[m].matrix()[(j / d, j % d)]);
    let units_from_probes = probe_to_units
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidBasis("probe states are not linearly independent".into()))?;
    Ok(NaturalBasis { dim: d, units, probes, probe_to_units, units_from_probes })
}

/// Sparse `d⁴ × d⁴` matrix with `B vec(X) = vec(Λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BMatrix {
    pub dim: usize,
    /// `(row, col, value)` triplets; rows and columns follow the module's index maps.
    pub entries: Vec<(usize, usize, C64)>,
    /// Set when built from natural bases, in which case `B` is a permutation matrix.
    pub unitary: bool,
}

impl BMatrix {
    pub fn size(&self) -> usize {
        self.dim.pow(4)
    }

    pub fn to_dense(&self) -> CMatrix {
        let n = self.size();
        let mut m = CMatrix::zeros(n, n);
        for &(r, col, v) in &self.entries {
            m[(r, col)] += v;
        }
        m
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.size());
        for &(r, col, val) in &self.entries {
            out[r] += val * v[col];
        }
        out
    }

    pub fn apply_adjoint(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.size());
        for &(r, col, val) in &self.entries {
            out[col] += val.conj() * v[r];
        }
        out
    }

    /// `B⁻¹ v`: the adjoint for natural bases, a dense solve otherwise.
    pub fn solve(&self, v: &CVector) -> Result<CVector> {
        if self.unitary {
            return Ok(self.apply_adjoint(v));
        }
        self.to_dense().lu().solve(v).ok_or_else(|| Error::ContractViolation("B-matrix is singular".into()))
    }
}

/// Closed-form B-matrix for natural bases: `F_(a,b) ρ_(b,b') F_(a',b')† = ρ_(a,a')`.
pub fn build_b_natural(d: usize) -> BMatrix {
    let d2 = d * d;
    let mut entries = Vec::with_capacity(d2 * d2);
    for k in 0..d2 {
        let (a2, b2) = (k / d, k % d);
        for j in 0..d2 {
            let (a, b) = (j / d, j % d);
            let m = b * d + b2;
            let n = a * d + a2;
            entries.push((n * d2 + m, k * d2 + j, ONE));
        }
    }
    BMatrix { dim: d, entries, unitary: true }
}

/// B-matrix for arbitrary complete bases, expanding every `Fⱼ ρₘ F_k†` in `{ρₙ}`.
pub fn build_b(d: usize, f_basis: &[CMatrix], rho_basis: &[CMatrix]) -> Result<BMatrix> {
    let d2 = d * d;
    if f_basis.len() != d2 || rho_basis.len() != d2 {
        return Err(Error::InvalidBasis(format!(
            "bases need {d2} elements, got {} and {}",
            f_basis.len(),
            rho_basis.len()
        )));
    }
    if f_basis.iter().chain(rho_basis).any(|m| m.nrows() != d || m.ncols() != d) {
        return Err(Error::DimensionMismatch(format!("basis elements must be {d}x{d}")));
    }
    let natural = f_basis.iter().chain(rho_basis).enumerate().all(|(i, m)| *m == matrix_unit(d, i % d2));
    if natural {
        return Ok(build_b_natural(d));
    }
    let r = CMatrix::from_fn(d2, d2, |row, n| vec(&rho_basis[n])[row]);
    let lu = r.lu();
    if lu.u().diagonal().iter().any(|z| z.norm() < 1e-12) {
        return Err(Error::InvalidBasis("input basis is rank deficient".into()));
    }
    let mut entries = Vec::new();
    for k in 0..d2 {
        let fk_adj = f_basis[k].adjoint();
        for (j, fj) in f_basis.iter().enumerate() {
            for (m, rho_m) in rho_basis.iter().enumerate() {
                let prod = fj * rho_m * &fk_adj;
                let coeffs = lu.solve(&vec(&prod)).ok_or_else(|| Error::InvalidBasis("singular input basis".into()))?;
                for (n, &v) in coeffs.iter().enumerate() {
                    if v.norm() > 1e-14 {
                        entries.push((n * d2 + m, k * d2 + j, v));
                    }
                }
            }
        }
    }
    let mut b = BMatrix { dim: d, entries, unitary: false };
    let dense = b.to_dense();
    b.unitary = crate::linalg::is_unitary(&dense, 1e-9);
    Ok(b)
}

/// `λ_mn` with `ε(ρₘ) = Σₙ λ_mn ρₙ` for the matrix-unit input basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub dim: usize,
    pub lambda: CMatrix,
}

/// How the channel outputs are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    Noiseless,
    /// Tomography on every probe output with `shots` copies per measurement basis.
    Sampled {
        shots: u64,
        seed: u64,
    },
}

fn lambda_from_unit_outputs(d: usize, outputs: &[CMatrix]) -> TransferMatrix {
    let d2 = d * d;
    let lambda = CMatrix::from_fn(d2, d2, |m, n| outputs[m][(n / d, n % d)]);
    TransferMatrix { dim: d, lambda }
}

/// Transfer matrix of `channel`, exactly or from simulated output-state tomography.
///
/// In sampled mode each probe output is reconstructed with batch tomography (cube bases for
/// qubit registers, the pairwise set otherwise) and the outputs for the matrix units follow by
/// linearity through [`NaturalBasis::units_from_probes`].
pub fn estimate_lambda(channel: &KrausSet, basis: &NaturalBasis, mode: LambdaMode) -> Result<TransferMatrix> {
    let d = channel.dim();
    if basis.dim != d {
        return Err(Error::DimensionMismatch(format!("channel dimension {d} vs basis dimension {}", basis.dim)));
    }
    let d2 = d * d;
    let outputs: Vec<CMatrix> = match mode {
        LambdaMode::Noiseless => basis.units.iter().map(|u| channel.apply_linear(u)).collect(),
        LambdaMode::Sampled { shots, seed } => {
            if shots == 0 {
                return Err(Error::InvalidArgument("shots must be at least 1".into()));
            }
            let gm = gell_mann_basis(d)?;
            let povms = standard_povms(d)?;
            let probe_out: Vec<CMatrix> = basis
                .probes
                .par_iter()
                .enumerate()
                .map(|(m, probe)| {
                    let out = apply_channel(channel, probe)?;
                    let mut rng = rng_from_seed(derive_seed(seed, m as u64));
                    let mut records = Vec::new();
                    for p in &povms {
                        records.extend(simulate_measurements_with(&out, p, &gm, shots, &mut rng)?);
                    }
                    Ok(tomography_pipeline(&records, d, &gm, WeightPolicy::Shots)?.state.into_matrix())
                })
                .collect::<Result<_>>()?;
            (0..d2)
                .map(|n| {
                    (0..d2).fold(CMatrix::zeros(d, d), |acc, m| acc + &probe_out[m] * basis.units_from_probes[(n, m)])
                })
                .collect()
        }
    };
    Ok(lambda_from_unit_outputs(d, &outputs))
}

/// Physical process-matrix estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessMatrix {
    pub dim: usize,
    #[serde(with = "matrix_serde")]
    pub x: CMatrix,
    /// `‖Σ x_jk F_k† F_j − I‖_F`.
    pub completeness_residual: f64,
}

mod matrix_serde {
    use super::CMatrix;
    use crate::linalg::MatrixJson;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        MatrixJson::deserialize(d)?.to_matrix().map_err(serde::de::Error::custom)
    }
}

/// `Σ_{j,k} x_jk F_k† F_j` for matrix units: entry `(b', b)` is `Σ_a x_{(a,b),(a,b')}`.
pub fn completeness_operator(d: usize, x: &CMatrix) -> CMatrix {
    CMatrix::from_fn(d, d, |b2, b| (0..d).map(|a| x[(a * d + b, a * d + b2)]).sum())
}

/// `X̂` from `B vec(X) = vec(Λ)`, Hermitized and clipped to the PSD cone.
///
/// Negative eigenvalues are zeroed and the trace is left alone; the completeness residual is
/// reported rather than enforced.
pub fn solve_process_matrix(b: &BMatrix, lambda: &TransferMatrix) -> Result<ProcessMatrix> {
    let d = lambda.dim;
    if b.dim != d {
        return Err(Error::DimensionMismatch(format!("B for d = {}, Λ for d = {d}", b.dim)));
    }
    let raw = vec_inv(&b.solve(&vec(&lambda.lambda))?, d * d, d * d)?;
    let (vals, vecs) = eigh(&hermitize(&raw));
    let clipped: Vec<C64> = vals.iter().map(|&v| c(v.max(0.0), 0.0)).collect();
    let x = hermitize(&crate::linalg::spectral_compose(&clipped, &vecs));
    let completeness_residual = frobenius(&(completeness_operator(d, &x) - identity(d)));
    Ok(ProcessMatrix { dim: d, x, completeness_residual })
}

/// Result of [`identify_hamiltonian`].
#[derive(Debug, Clone)]
pub struct HamiltonianEstimate {
    pub hamiltonian: CMatrix,
    /// Fitted unitary `Ĝ` (so `e^{−iĤt} ∝ Ĝᵀ`).
    pub g: CMatrix,
    /// `λ₁ / Σλ` of the Hermitized `D̂`.
    pub rank1_dominance: f64,
    /// `‖Ĝ − Ŝ‖_F`.
    pub unitary_fit_distance: f64,
    /// The logarithm step met an eigenphase at `±π`.
    pub branch_ambiguous: bool,
}

/// Hamiltonian of a unitary channel from its (estimated) transfer matrix.
///
/// 1. `D̂ = vec⁻¹(B† vec Λ̂)`, Hermitized.
/// 2. `Ŝ = vec⁻¹(√λ₁ v₁)` from the top eigenpair of `D̂`: the best rank-1 `vec(Ŝ)vec(Ŝ)†`.
/// 3. `Ĝ` = nearest unitary to `Ŝ`.
/// 4. Global phase: `Ĝᵀ` is rescaled to unit determinant, picking among the `d` roots the one
///    whose principal eigenphases sum to zero with the smallest spectral radius.
/// 5. `Ĥ = unitary_log(Ĝᵀ, t)`, traceless.
///
/// Channel data cannot see the global phase, so recovery is unique only when the true
/// traceless `H` is that smallest-radius candidate (for a qubit: `‖H‖₂ t < π/2`).
pub fn identify_hamiltonian(lambda: &TransferMatrix, b: &BMatrix, t: f64) -> Result<HamiltonianEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let d = lambda.dim;
    if b.dim != d {
        return Err(Error::DimensionMismatch(format!("B for d = {}, Λ for d = {d}", b.dim)));
    }
    let raw = vec_inv(&b.solve(&vec(&lambda.lambda))?, d * d, d * d)?;
    let (vals, vecs) = eigh(&hermitize(&raw));
    let top = *vals.last().expect("non-empty spectrum");
    if !(top > 0.0) {
        return Err(Error::DegenerateData(format!("largest eigenvalue of D is {top:e}")));
    }
    let total: f64 = vals.iter().sum();
    let v1 = vecs.column(d * d - 1).into_owned() * c(top.sqrt(), 0.0);
    let s = vec_inv(&v1, d, d)?;
    let g = nearest_unitary(&s)?;
    let unitary_fit_distance = frobenius(&(&g - &s));
    let propagator = fix_global_phase(&g.transpose())?;
    let log = unitary_log(&propagator, t)?;
    Ok(HamiltonianEstimate {
        hamiltonian: log.generator,
        g,
        rank1_dominance: top / total,
        unitary_fit_distance,
        branch_ambiguous: log.branch_ambiguous,
    })
}

/// Rescales a unitary by the unit-determinant phase `e^{−iα}` (α one of the `d` roots of
/// `det U`) whose wrapped eigenphases sum to zero with the smallest largest magnitude.
pub fn fix_global_phase(u: &CMatrix) -> Result<CMatrix> {
    if !is_square(u) {
        return Err(Error::DimensionMismatch("square matrix expected".into()));
    }
    let d = u.nrows();
    let phases = unitary_log(u, 1.0)?.phases;
    let det_phase: f64 = phases.iter().sum();
    let wrap = |x: f64| {
        let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
        if y <= -PI {
            y = PI;
        }
        y
    };
    let mut best: Option<(f64, f64)> = None;
    for j in 0..d {
        let alpha = det_phase / d as f64 + 2.0 * PI * j as f64 / d as f64;
        let shifted: Vec<f64> = phases.iter().map(|&p| wrap(p - alpha)).collect();
        if shifted.iter().sum::<f64>().abs() > 1e-6 {
            continue;
        }
        let radius = shifted.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if best.is_none_or(|(r, _)| radius < r - 1e-12) {
            best = Some((radius, alpha));
        }
    }
    let (_, alpha) = best.ok_or_else(|| Error::DegenerateData("no zero-trace phase branch".into()))?;
    Ok(u * C64::from_polar(1.0, -alpha))
}

/// Global-phase-invariant overlap `|Tr(A† B)| / d`.
pub fn phase_invariant_fidelity(a: &CMatrix, b: &CMatrix) -> f64 {
    let tr: C64 = (a.adjoint() * b).diagonal().sum();
    tr.norm() / a.nrows() as f64
}
