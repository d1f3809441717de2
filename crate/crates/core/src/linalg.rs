// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex matrix kernels shared by every other module.
//!
//! Matrices are `nalgebra` dynamic matrices of `Complex<f64>`. Everything here is a pure
//! function of its inputs. The main entry points are:
//!
//! - [`gell_mann_basis`]: traceless orthonormal Hermitian basis used to parameterize states.
//! - [`vec`] / [`vec_inv`]: column-stacking vectorization.
//! - [`herm_expm`]: `exp(-i s H)` for Hermitian `H` through its spectral decomposition.
//! - [`nearest_unitary`]: polar factor of a full-rank square matrix.
//! - [`unitary_log`]: Hermitian generator of a unitary on the principal branch.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Distance from an eigenphase to `±π` below which [`unitary_log`] flags the branch as ambiguous.
pub const BRANCH_TOLERANCE: f64 = 1e-6;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `(m + m†) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// `|ψ⟩⟨ψ|`.
pub fn outer(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn is_square(m: &CMatrix) -> bool {
    m.nrows() == m.ncols()
}

/// Largest entrywise deviation from Hermiticity is at most `tol`.
pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if !is_square(m) {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// `‖U†U − I‖_F ≤ tol`.
pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    is_square(m) && frobenius(&(m.adjoint() * m - identity(m.nrows()))) <= tol
}

/// Hermitian within `tol` and smallest eigenvalue `≥ −tol`.
pub fn is_psd(m: &CMatrix, tol: f64) -> bool {
    if !is_hermitian(m, tol) {
        return false;
    }
    let (vals, _) = eigh(&hermitize(m));
    vals.first().is_none_or(|&v| v >= -tol)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending, eigenvectors as columns.
///
/// Only the lower triangle (after Hermitization by the caller) is meaningful to the solver, so
/// pass an exactly Hermitian matrix.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(f(λ)) V†` for eigenpairs `(λ, V)`.
pub fn spectral_compose(values: &[C64], vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        for z in scaled.column_mut(k).iter_mut() {
            *z *= v;
        }
    }
    scaled * vectors.adjoint()
}

/// Traceless orthonormal Hermitian operator basis of dimension `d`.
///
/// Elements satisfy `Tr Ωᵢ = 0` and `Tr(Ωᵢ Ωⱼ) = δᵢⱼ`. A [`crate::model::ThetaVector`] is
/// always expressed against the basis returned by [`gell_mann_basis`] for its dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBasis {
    dim: usize,
    elements: Vec<CMatrix>,
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of parameters, `d² − 1`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// Real coordinates `Tr(A Ωᵢ)` of a Hermitian operator.
    pub fn coordinates(&self, a: &CMatrix) -> Vec<f64> {
        self.elements.iter().map(|om| trace_product(a, om).re).collect()
    }

    /// `Σ θᵢ Ωᵢ`.
    pub fn combine(&self, coords: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (om, &t) in self.elements.iter().zip(coords) {
            out += om.scale(t);
        }
        out
    }
}

/// Generalized Gell-Mann basis for dimension `d ≥ 2`.
///
/// Ordering: the `d(d−1)/2` symmetric elements `(|j⟩⟨k| + |k⟩⟨j|)/√2`, then the `d(d−1)/2`
/// antisymmetric elements `(−i|j⟩⟨k| + i|k⟩⟨j|)/√2`, both for `j < k` in lexicographic
/// order, then the `d−1` diagonal elements
/// `(Σ_{m<l} |m⟩⟨m| − l|l⟩⟨l|)/√(l(l+1))` for `l = 1..d−1`.
/// For `d = 2` this is `(σx, σy, σz)/√2`.
pub fn gell_mann_basis(d: usize) -> Result<HermitianBasis> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("basis needs d >= 2, got {d}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut elements = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = c(s, 0.0);
            m[(k, j)] = c(s, 0.0);
            elements.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMatrix::zeros(d, d);
            m[(j, k)] = c(0.0, -s);
            m[(k, j)] = c(0.0, s);
            elements.push(m);
        }
    }
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let mut m = CMatrix::zeros(d, d);
        for mm in 0..l {
            m[(mm, mm)] = c(1.0 / norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) / norm, 0.0);
        elements.push(m);
    }
    Ok(HermitianBasis { dim: d, elements })
}

/// Column-stacking vectorization `[A₁₁, A₂₁, …, A_m1, A₁₂, …]ᵀ`.
pub fn vec(a: &CMatrix) -> CVector {
    // nalgebra storage is column-major, so iteration order is already column-stacked.
    CVector::from_iterator(a.len(), a.iter().copied())
}

/// Inverse of [`vec`].
pub fn vec_inv(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot fill a {rows}x{cols} matrix",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// `exp(−i s H)` for Hermitian `H`, through `H = V diag(λ) V†`.
pub fn herm_expm(h: &CMatrix, s: f64) -> Result<CMatrix> {
    if !is_hermitian(h, 1e-10) {
        return Err(Error::ContractViolation("herm_expm needs a Hermitian generator".into()));
    }
    let (vals, vecs) = eigh(&hermitize(h));
    Ok(expm_from_eigh(&vals, &vecs, s))
}

/// `exp(−i s H)` from a precomputed eigendecomposition of `H`.
pub fn expm_from_eigh(values: &[f64], vectors: &CMatrix, s: f64) -> CMatrix {
    let phases: Vec<C64> = values.iter().map(|&l| C64::from_polar(1.0, -s * l)).collect();
    spectral_compose(&phases, vectors)
}

/// The unitary closest to `s` in Frobenius norm, `U V†` from `S = U Σ V†`.
///
/// This also maximizes `|Tr(G† S)|` over unitaries `G`, which is what makes it the second step
/// of the unitary fit in [`crate::ident::identify_hamiltonian`].
pub fn nearest_unitary(s: &CMatrix) -> Result<CMatrix> {
    if !is_square(s) {
        return Err(Error::DimensionMismatch("nearest_unitary needs a square matrix".into()));
    }
    let svd = s.clone().svd(true, true);
    let smallest = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > 1e-12) {
        return Err(Error::Ambiguous(format!("polar factor is not unique: smallest singular value {smallest:e}")));
    }
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V†");
    Ok(u * v_t)
}

/// Result of [`unitary_log`].
#[derive(Debug, Clone)]
pub struct UnitaryLog {
    /// Traceless Hermitian `Ĥ` with `exp(−i t Ĥ) = U` up to a global phase.
    pub generator: CMatrix,
    /// Eigenphases of the input on `(−π, π]`, in eigenvector order.
    pub phases: Vec<f64>,
    /// Some eigenphase sat within [`BRANCH_TOLERANCE`] of `π`; the generator is then only one of
    /// several candidates.
    pub branch_ambiguous: bool,
}

/// Principal-branch Hermitian logarithm: `Ĥ = Σₖ (−φₖ / t) |vₖ⟩⟨vₖ|`, shifted to zero trace.
///
/// `U` is unitary, hence normal, so its complex Schur form is diagonal and the Schur vectors
/// are eigenvectors. Recovery of a generator `H` is exact only when `‖H‖₂ t < π`; beyond that
/// the eigenphases alias.
pub fn unitary_log(u: &CMatrix, t: f64) -> Result<UnitaryLog> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    if !is_unitary(u, 1e-8) {
        return Err(Error::ContractViolation("unitary_log needs a unitary input".into()));
    }
    let d = u.nrows();
    let (eigvals, eigvecs) = normal_eigen(u);
    let mut branch_ambiguous = false;
    let phases: Vec<f64> = eigvals
        .iter()
        .map(|z| {
            let mut phi = z.arg();
            if phi <= -PI {
                phi = PI;
            }
            if PI - phi.abs() < BRANCH_TOLERANCE {
                branch_ambiguous = true;
            }
            phi
        })
        .collect();
    let energies: Vec<C64> = phases.iter().map(|&p| c(-p / t, 0.0)).collect();
    let mut h = hermitize(&spectral_compose(&energies, &eigvecs));
    let shift = trace(&h).re / d as f64;
    for k in 0..d {
        h[(k, k)] -= c(shift, 0.0);
    }
    Ok(UnitaryLog { generator: h, phases, branch_ambiguous })
}

/// Eigenvalues and orthonormal eigenvectors of a normal matrix via complex Schur.
fn normal_eigen(u: &CMatrix) -> (Vec<C64>, CMatrix) {
    let d = u.nrows();
    if let Some(schur) = nalgebra::Schur::try_new(u.clone(), 1e-15, 10_000) {
        let (q, t) = schur.unpack();
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| t[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off < 1e-9 {
            return ((0..d).map(|k| t[(k, k)]).collect(), q);
        }
    }
    // Fallback: the Hermitian and anti-Hermitian parts of a normal matrix commute, so a
    // generic real combination of them shares its eigenvectors.
    let herm = hermitize(u);
    let anti = (u - u.adjoint()).scale(0.5) * c(0.0, -1.0);
    let mix = herm.scale(0.618_033_988_749_894_9) + anti.scale(0.377_964_473_009_227_2);
    let (_, vecs) = eigh(&hermitize(&mix));
    let values = (0..d)
        .map(|k| {
            let v = vecs.column(k);
            (v.adjoint() * u * v)[(0, 0)]
        })
        .collect();
    (values, vecs)
}

/// Serialized matrix: `{"rows": r, "cols": c, "data": [[re, im], ...]}`, column-stacked
/// (same order as [`vec`]). An optional `label` names density matrices and POVM elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self { label: None, rows: m.nrows(), cols: m.ncols(), data: m.iter().map(|z| [z.re, z.im]).collect() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let v = CVector::from_iterator(self.data.len(), self.data.iter().map(|&[re, im]| c(re, im)));
        vec_inv(&v, self.rows, self.cols)
    }
}
