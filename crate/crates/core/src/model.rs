// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! States, measurements and simulated measurement data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    c, eigh, frobenius, gell_mann_basis, hermitize, identity, is_hermitian, outer, trace, trace_product, CMatrix,
    CVector, HermitianBasis, C64, ONE, ZERO,
};

/// Deterministic generator used everywhere a seed appears in an API.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes `(seed, index)` into an independent child seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hermitian, positive semidefinite, unit-trace `d × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !is_hermitian(&matrix, Self::TOLERANCE) {
            return Err(Error::ContractViolation("density matrix must be Hermitian".into()));
        }
        let tr = trace(&matrix);
        if (tr - ONE).norm() > Self::TOLERANCE {
            return Err(Error::ContractViolation(format!("density matrix trace is {tr}")));
        }
        let (vals, _) = eigh(&hermitize(&matrix));
        if vals[0] < -Self::TOLERANCE {
            return Err(Error::ContractViolation(format!("density matrix has eigenvalue {:e}", vals[0])));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn new_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self { matrix: outer(psi.amplitudes()) }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: identity(d).scale(1.0 / d as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.matrix, &self.matrix).re
    }
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::ContractViolation(format!("state norm is {n}, expected 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(Self { amplitudes: amplitudes.unscale(n) })
    }

    pub(crate) fn new_unchecked(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    /// Computational basis state `|k⟩`.
    pub fn basis(d: usize, k: usize) -> Self {
        let mut v = CVector::zeros(d);
        v[k] = ONE;
        Self { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Coordinates of a state against the Gell-Mann basis of dimension `dim`:
/// `ρ = I/d + Σ θᵢ Ωᵢ` with `θᵢ = Tr(ρ Ωᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl ThetaVector {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, values: vec![0.0; dim * dim - 1] }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_basis(dim: usize, basis: &HermitianBasis) -> Result<()> {
    if basis.dim() != dim {
        return Err(Error::DimensionMismatch(format!("basis has dimension {}, state has {dim}", basis.dim())));
    }
    Ok(())
}

/// `I/d + Σ θᵢ Ωᵢ`: Hermitian with unit trace, not necessarily PSD.
pub fn rho_from_theta(theta: &ThetaVector, basis: &HermitianBasis) -> Result<CMatrix> {
    check_basis(theta.dim, basis)?;
    if theta.values.len() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, basis has {}",
            theta.values.len(),
            basis.len()
        )));
    }
    let d = theta.dim;
    Ok(identity(d).scale(1.0 / d as f64) + basis.combine(&theta.values))
}

pub fn theta_from_rho(rho: &DensityMatrix, basis: &HermitianBasis) -> Result<ThetaVector> {
    check_basis(rho.dim(), basis)?;
    Ok(ThetaVector { dim: rho.dim(), values: basis.coordinates(rho.matrix()) })
}

/// A labelled POVM `{Pᵢ}`, `Pᵢ ⪰ 0`, `Σ Pᵢ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    label: String,
    elements: Vec<CMatrix>,
}

impl Povm {
    pub fn new(label: impl Into<String>, elements: Vec<CMatrix>) -> Result<Self> {
        let label = label.into();
        let Some(first) = elements.first() else {
            return Err(Error::InvalidArgument(format!("POVM {label} has no elements")));
        };
        let d = first.nrows();
        let mut sum = CMatrix::zeros(d, d);
        for e in &elements {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::DimensionMismatch(format!("POVM {label} mixes dimensions")));
            }
            if !is_hermitian(e, 1e-10) || eigh(&hermitize(e)).0[0] < -1e-10 {
                return Err(Error::ContractViolation(format!("POVM {label} has a non-PSD element")));
            }
            sum += e;
        }
        if frobenius(&(sum - identity(d))) > 1e-9 {
            return Err(Error::ContractViolation(format!("POVM {label} elements do not sum to identity")));
        }
        Ok(Self { label, elements })
    }

    /// Projective measurement onto an orthonormal basis given as matrix columns.
    pub fn projective(label: impl Into<String>, basis: &CMatrix) -> Result<Self> {
        let elements = basis.column_iter().map(|col| outer(&col.into_owned())).collect();
        Self::new(label, elements)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Outcome counts for one POVM element together with its regression coordinates
/// `γ₀ = Tr E` and `Γᵢ = Tr(E Ωᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub povm: String,
    pub element: usize,
    pub shots: u64,
    pub successes: u64,
    pub gamma0: f64,
    pub gamma: Vec<f64>,
}

impl MeasurementRecord {
    /// Builds a record for `element`, computing its coordinates against `basis`.
    pub fn for_element(
        povm: &str,
        index: usize,
        element: &CMatrix,
        basis: &HermitianBasis,
        shots: u64,
        successes: u64,
    ) -> Result<Self> {
        if successes > shots {
            return Err(Error::InvalidArgument(format!("{successes} successes out of {shots} shots")));
        }
        check_basis(element.nrows(), basis)?;
        Ok(Self {
            povm: povm.to_string(),
            element: index,
            shots,
            successes,
            gamma0: trace(element).re,
            gamma: basis.coordinates(element),
        })
    }

    /// `p̂ = n₁ / n`.
    pub fn frequency(&self) -> f64 {
        self.successes as f64 / self.shots as f64
    }
}

fn check_dims(rho: &DensityMatrix, povm: &Povm) -> Result<()> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs POVM dimension {}",
            rho.dim(),
            povm.dim()
        )));
    }
    Ok(())
}

/// `pᵢ = Tr(ρ Pᵢ)`, clamped to `[0, 1]`.
pub fn born_probabilities(rho: &DensityMatrix, povm: &Povm) -> Result<Vec<f64>> {
    check_dims(rho, povm)?;
    Ok(povm.elements().iter().map(|e| trace_product(rho.matrix(), e).re.clamp(0.0, 1.0)).collect())
}

/// One multinomial draw of `shots` outcomes; one record per POVM element.
pub fn simulate_measurements(
    rho: &DensityMatrix,
    povm: &Povm,
    basis: &HermitianBasis,
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    simulate_measurements_with(rho, povm, basis, shots, &mut rng_from_seed(seed))
}

/// [`simulate_measurements`] drawing from a caller-owned generator.
pub fn simulate_measurements_with<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    povm: &Povm,
    basis: &HermitianBasis,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<MeasurementRecord>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be at least 1".into()));
    }
    let probs = born_probabilities(rho, povm)?;
    let counts = multinomial(shots, &probs, rng);
    povm.elements()
        .iter()
        .zip(counts)
        .enumerate()
        .map(|(j, (e, n1))| MeasurementRecord::for_element(povm.label(), j, e, basis, shots, n1))
        .collect()
}

/// Noiseless data: each record paired with its exact Born probability. `successes` holds the
/// rounded expected count; regression code should use the paired probability instead.
pub fn exact_records(
    rho: &DensityMatrix,
    povm: &Povm,
    basis: &HermitianBasis,
    shots: u64,
) -> Result<Vec<(MeasurementRecord, f64)>> {
    let probs = born_probabilities(rho, povm)?;
    povm.elements()
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(j, (e, p))| {
            let n1 = (p * shots as f64).round() as u64;
            Ok((MeasurementRecord::for_element(povm.label(), j, e, basis, shots, n1)?, p))
        })
        .collect()
}

/// Sequential conditional-binomial multinomial sampler.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out.push(remaining);
            break;
        }
        let draw = if remaining == 0 || p <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            if q >= 1.0 {
                remaining
            } else {
                Binomial::new(remaining, q).expect("valid binomial").sample(rng)
            }
        };
        out.push(draw);
        remaining -= draw;
        mass -= p;
    }
    // A last outcome with zero probability can only receive leftovers from rounding in `mass`.
    if let (Some(&p_last), Some(last)) = (probs.last(), out.last_mut()) {
        if p_last <= 0.0 && *last > 0 {
            let extra = *last;
            *last = 0;
            if let Some((idx, _)) = probs.iter().enumerate().take(probs.len() - 1).max_by(|a, b| a.1.total_cmp(b.1)) {
                out[idx] += extra;
            }
        }
    }
    out
}

/// Number of qubits when `d = 2^q`.
pub fn qubit_count(d: usize) -> Option<usize> {
    (d >= 2 && d.is_power_of_two()).then(|| d.trailing_zeros() as usize)
}

fn single_qubit_axis(axis: char) -> [CVector; 2] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: C64, b: C64| CVector::from_vec(vec![a, b]);
    match axis {
        'x' => [v(c(s, 0.0), c(s, 0.0)), v(c(s, 0.0), c(-s, 0.0))],
        'y' => [v(c(s, 0.0), c(0.0, s)), v(c(s, 0.0), c(0.0, -s))],
        _ => [v(ONE, ZERO), v(ZERO, ONE)],
    }
}

/// Tensor-product Pauli eigenbasis measurement for a label such as `"xz"`.
///
/// Element `e` is the product of the per-qubit eigenprojectors with the first qubit as the most
/// significant bit of `e`; bit value 0 selects the `+1` eigenvector.
pub fn cube_povm(label: &str) -> Result<Povm> {
    if label.is_empty() || !label.chars().all(|ch| matches!(ch, 'x' | 'y' | 'z')) {
        return Err(Error::InvalidArgument(format!("not a cube label: {label:?}")));
    }
    let mut vectors: Vec<CVector> = vec![CVector::from_element(1, ONE)];
    for axis in label.chars() {
        let pair = single_qubit_axis(axis);
        vectors = vectors.iter().flat_map(|v| pair.iter().map(move |p| v.kronecker(p))).collect();
    }
    Povm::new(label, vectors.iter().map(outer).collect())
}

/// All `3^q` cube measurements for `d = 2^q`, labels in lexicographic order (`x < y < z`).
pub fn cube_povms(d: usize) -> Result<Vec<Povm>> {
    let q = qubit_count(d).ok_or_else(|| Error::Unsupported(format!("cube bases need d = 2^q, got {d}")))?;
    let mut labels = vec![String::new()];
    for _ in 0..q {
        labels = labels.iter().flat_map(|l| ['x', 'y', 'z'].into_iter().map(move |a| format!("{l}{a}"))).collect();
    }
    labels.iter().map(|l| cube_povm(l)).collect()
}

/// Informationally complete projective set for any `d ≥ 2`: the computational basis plus, for
/// every pair `j < k`, the bases that replace `|j⟩, |k⟩` by `(|j⟩ ± |k⟩)/√2` (`re-j-k`) and by
/// `(|j⟩ ± i|k⟩)/√2` (`im-j-k`). For `d = 2` this is the z, x, y cube set.
pub fn pairwise_povms(d: usize) -> Result<Vec<Povm>> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("need d >= 2, got {d}")));
    }
    let mut out = vec![Povm::projective("comp", &identity(d))?];
    for phase in ["re", "im"] {
        for j in 0..d {
            for k in (j + 1)..d {
                out.push(pairwise_povm(d, phase, j, k)?);
            }
        }
    }
    Ok(out)
}

fn pairwise_povm(d: usize, phase: &str, j: usize, k: usize) -> Result<Povm> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rel = if phase == "re" { c(s, 0.0) } else { c(0.0, s) };
    let mut basis = identity(d);
    basis[(j, j)] = c(s, 0.0);
    basis[(k, j)] = rel;
    basis[(j, k)] = c(s, 0.0);
    basis[(k, k)] = -rel;
    Povm::projective(format!("{phase}-{j}-{k}"), &basis)
}

/// Cube measurements when `d` is a power of two, the pairwise set otherwise.
pub fn standard_povms(d: usize) -> Result<Vec<Povm>> {
    if qubit_count(d).is_some() {
        cube_povms(d)
    } else {
        pairwise_povms(d)
    }
}

/// Looks up a POVM by label among the cube and pairwise families for dimension `d`.
pub fn resolve_povm(label: &str, d: usize) -> Result<Povm> {
    if let Some(q) = qubit_count(d) {
        if label.len() == q && label.chars().all(|ch| matches!(ch, 'x' | 'y' | 'z')) {
            return cube_povm(label);
        }
    }
    if label == "comp" {
        return Povm::projective("comp", &identity(d));
    }
    let parts: Vec<&str> = label.split('-').collect();
    if let [phase @ ("re" | "im"), j, k] = parts.as_slice() {
        if let (Ok(j), Ok(k)) = (j.parse::<usize>(), k.parse::<usize>()) {
            if j < k && k < d {
                return pairwise_povm(d, phase, j, k);
            }
        }
    }
    Err(Error::InvalidArgument(format!("unknown POVM label {label:?} for d = {d}")))
}

/// Squared Hilbert-Schmidt distance `Tr((a − b)²)`.
pub fn mse(est: &DensityMatrix, truth: &DensityMatrix) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch(format!(
            "estimate dimension {} vs truth dimension {}",
            est.dim(),
            truth.dim()
        )));
    }
    let diff = est.matrix() - truth.matrix();
    Ok(trace_product(&diff, &diff).re.max(0.0))
}

fn ginibre_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVector {
    CVector::from_fn(d, |_, _| c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
}

/// Haar-random pure state.
pub fn haar_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> PureState {
    loop {
        let v = ginibre_vector(d, rng);
        if v.norm() > 1e-12 {
            return PureState::new_unchecked(v.unscale(v.norm()));
        }
    }
}

/// Hilbert-Schmidt random mixed state `G G† / Tr(G G†)` with square Ginibre `G`.
pub fn random_mixed_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let g =
        CMatrix::from_fn(d, d, |_, _| c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)));
    let w = &g * g.adjoint();
    let tr = trace(&w).re;
    DensityMatrix::new_unchecked(hermitize(&w.unscale(tr)))
}

/// Haar-random unitary via QR of a Ginibre matrix with the phase correction on `R`'s diagonal.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let g =
        CMatrix::from_fn(d, d, |_, _| c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..d {
        let z = r[(k, k)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { ONE };
        for i in 0..d {
            q[(i, k)] *= ph;
        }
    }
    q
}

/// Convenience: Gell-Mann basis for `rho`'s dimension.
pub fn basis_for(d: usize) -> Result<HermitianBasis> {
    gell_mann_basis(d)
}
