// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Recursive regression tomography and adaptive measurement selection.
//!
//! The recursive estimator carries `(Q, Θ̂)` with `Q = (Σ W Γ Γᵀ)⁻¹`. A new row `(Γ, W, p̂)`
//! updates it through
//!
//! ```text
//! a  = (1/W + Γᵀ Q Γ)⁻¹
//! Q' = Q − a Q Γ Γᵀ Q
//! Θ' = Θ + a Q Γ (p̂ − γ₀/d − Γᵀ Θ)
//! ```
//!
//! and the trace gain `Tr Q − Tr Q' = a ‖Q Γ‖²` ranks candidate measurements.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, gell_mann_basis, CMatrix, CVector};
use crate::lre::{build_regression, project_physical, solve_weighted_ls, RegressionProblem, WeightPolicy};
use crate::model::{
    cube_povms, mse, rho_from_theta, rng_from_seed, simulate_measurements_with, DensityMatrix, MeasurementRecord, Povm,
    ThetaVector,
};
use crate::HermitianBasis;

/// Running state of the recursive estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveState {
    pub q: DMatrix<f64>,
    pub theta: ThetaVector,
    pub step: usize,
    pub copies_used: u64,
}

impl RecursiveState {
    pub fn trace_q(&self) -> f64 {
        self.q.trace()
    }

    /// Predicted outcome probability `γ₀/d + Γᵀ Θ̂` clamped to `[0, 1]`.
    pub fn predicted_probability(&self, gamma0: f64, gamma: &[f64]) -> f64 {
        let lin: f64 = gamma.iter().zip(&self.theta.values).map(|(g, t)| g * t).sum();
        (gamma0 / self.theta.dim as f64 + lin).clamp(0.0, 1.0)
    }
}

/// Copy budget `N = N₁ + K · N₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdaptiveSchedule {
    pub total: u64,
    pub stage1: u64,
    pub per_step: u64,
    pub steps: usize,
}

impl AdaptiveSchedule {
    /// Splits `total − stage1` evenly over `steps` rounds.
    pub fn new(total: u64, stage1: u64, steps: usize) -> Result<Self> {
        if stage1 == 0 || stage1 > total {
            return Err(Error::InvalidArgument(format!("stage-1 copies must be in 1..={total}, got {stage1}")));
        }
        let rest = total - stage1;
        if steps == 0 {
            if rest != 0 {
                return Err(Error::InvalidArgument(format!("{rest} copies left over with zero adaptive steps")));
            }
            return Ok(Self { total, stage1, per_step: 0, steps });
        }
        if !rest.is_multiple_of(steps as u64) || rest == 0 {
            return Err(Error::InvalidArgument(format!("N - N1 = {rest} is not a positive multiple of K = {steps}")));
        }
        Ok(Self { total, stage1, per_step: rest / steps as u64, steps })
    }
}

/// `Q₀ = (Xᵀ W X)⁻¹` and `Θ̂₀` from a solved batch problem.
pub fn rls_init_from_batch(problem: &RegressionProblem, theta_hat: &ThetaVector) -> Result<RecursiveState> {
    let p = problem.params();
    let info = problem.information();
    let eig = info.clone().symmetric_eigen();
    let top = eig.eigenvalues.max();
    let rank = eig.eigenvalues.iter().filter(|&&v| v > top * 1e-12).count();
    if rank < p {
        return Err(Error::SingularDesign { nullity: p - rank, params: p });
    }
    let q = nalgebra::Cholesky::new(info).ok_or(Error::SingularDesign { nullity: 1, params: p })?.inverse();
    Ok(RecursiveState { q: symmetrize(q), theta: theta_hat.clone(), step: 0, copies_used: 0 })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Folds one regression row into the state. `copies_used` is not touched; callers account for
/// copies per POVM, not per element.
pub fn rls_update(state: &RecursiveState, record: &MeasurementRecord, weight: f64) -> Result<RecursiveState> {
    rls_update_with_frequency(state, record, record.frequency(), weight)
}

pub fn rls_update_with_frequency(
    state: &RecursiveState,
    record: &MeasurementRecord,
    frequency: f64,
    weight: f64,
) -> Result<RecursiveState> {
    if !(weight > 0.0) {
        return Err(Error::InvalidArgument(format!("weight must be positive, got {weight}")));
    }
    let p = state.q.nrows();
    if record.gamma.len() != p {
        return Err(Error::DimensionMismatch(format!("record has {} coordinates, state has {p}", record.gamma.len())));
    }
    let gamma = DVector::from_column_slice(&record.gamma);
    let q_gamma = &state.q * &gamma;
    let a = 1.0 / (1.0 / weight + gamma.dot(&q_gamma));
    let q = symmetrize(&state.q - (&q_gamma * q_gamma.transpose()) * a);
    let theta_old = DVector::from_column_slice(&state.theta.values);
    let innovation = frequency - record.gamma0 / state.theta.dim as f64 - gamma.dot(&theta_old);
    let theta = theta_old + q_gamma * (a * innovation);
    Ok(RecursiveState {
        q,
        theta: ThetaVector { dim: state.theta.dim, values: theta.as_slice().to_vec() },
        step: state.step + 1,
        copies_used: state.copies_used,
    })
}

/// Closed-form `Tr Q − Tr Q'` for a row `(Γ, W)`, without updating.
pub fn trace_gain(state: &RecursiveState, gamma: &[f64], weight: f64) -> f64 {
    let g = DVector::from_column_slice(gamma);
    let qg = &state.q * &g;
    let a = 1.0 / (1.0 / weight + g.dot(&qg));
    a * qg.norm_squared()
}

/// Summed element-wise trace gain of measuring `povm` with `planned_shots` copies; weights
/// follow `policy` evaluated at the predicted probabilities.
pub fn povm_gain(
    state: &RecursiveState,
    povm: &Povm,
    basis: &HermitianBasis,
    policy: WeightPolicy,
    planned_shots: u64,
) -> f64 {
    povm.elements()
        .iter()
        .map(|e| {
            let gamma = basis.coordinates(e);
            let gamma0 = crate::linalg::trace(e).re;
            let p = state.predicted_probability(gamma0, &gamma);
            trace_gain(state, &gamma, policy.weight(planned_shots, p))
        })
        .sum()
}

/// Index of the candidate with the largest [`povm_gain`]; ties go to the lowest index.
pub fn select_next_povm(
    state: &RecursiveState,
    candidates: &[Povm],
    basis: &HermitianBasis,
    policy: WeightPolicy,
    planned_shots: u64,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate measurements".into()));
    }
    let mut best = 0;
    let mut best_gain = f64::NEG_INFINITY;
    for (k, p) in candidates.iter().enumerate() {
        let g = povm_gain(state, p, basis, policy, planned_shots);
        if g > best_gain * (1.0 + 1e-12) + 1e-300 || best_gain == f64::NEG_INFINITY {
            best = k;
            best_gain = g;
        }
    }
    Ok(best)
}

/// Projective qubit measurement along Bloch direction `n` (normalized internally).
pub fn bloch_povm(n: &Vector3<f64>) -> Result<Povm> {
    let n = n.normalize();
    let theta = n.z.clamp(-1.0, 1.0).acos();
    let phi = n.y.atan2(n.x);
    let up = CVector::from_vec(vec![c((theta / 2.0).cos(), 0.0), c(phi.cos(), phi.sin()) * (theta / 2.0).sin()]);
    let down = CVector::from_vec(vec![c((theta / 2.0).sin(), 0.0), -c(phi.cos(), phi.sin()) * (theta / 2.0).cos()]);
    let label = format!("bloch({:.6},{:.6},{:.6})", n.x, n.y, n.z);
    Povm::projective(label, &CMatrix::from_columns(&[up, down]))
}

fn bloch_gain(state: &RecursiveState, n: &Vector3<f64>, policy: WeightPolicy, shots: u64) -> f64 {
    // Elements (I ± n·σ)/2 have Γ = ±n/√2 in the (σx, σy, σz)/√2 basis and γ₀ = 1.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = [n.x * s, n.y * s, n.z * s];
    let minus = [-g[0], -g[1], -g[2]];
    let p_plus = state.predicted_probability(1.0, &g);
    trace_gain(state, &g, policy.weight(shots, p_plus)) + trace_gain(state, &minus, policy.weight(shots, 1.0 - p_plus))
}

/// Qubit measurement direction maximizing the trace gain over the whole Bloch sphere.
///
/// With shot-proportional weights the gain `w‖Qn‖²/(1 + w nᵀQn/2)` peaks at the top eigenvector
/// of `Q`. Inverse-variance weights depend on the direction too, so the search seeds a local
/// ascent from the cube axes, the eigenvectors of `Q` and a Fibonacci grid. Exact ties keep the
/// earliest seed, so an isotropic `Q` returns the x axis.
pub fn optimal_qubit_basis(state: &RecursiveState, policy: WeightPolicy, planned_shots: u64) -> Result<Povm> {
    optimal_qubit_direction(state, policy, planned_shots).and_then(|n| bloch_povm(&n))
}

pub fn optimal_qubit_direction(
    state: &RecursiveState,
    policy: WeightPolicy,
    planned_shots: u64,
) -> Result<Vector3<f64>> {
    if state.theta.dim != 2 {
        return Err(Error::Unsupported(format!("continuum basis search is qubit-only, got d = {}", state.theta.dim)));
    }
    let mut seeds = vec![Vector3::x(), Vector3::y(), Vector3::z()];
    let eig = state.q.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    for k in order {
        let v = eig.eigenvectors.column(k);
        seeds.push(Vector3::new(v[0], v[1], v[2]));
    }
    if policy != WeightPolicy::Shots {
        let count = 512;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..count {
            let z = 1.0 - (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            seeds.push(Vector3::new(r * phi.cos(), r * phi.sin(), z));
        }
    }
    let gain = |n: &Vector3<f64>| bloch_gain(state, n, policy, planned_shots);
    let mut best = seeds[0];
    let mut best_gain = gain(&best);
    for s in &seeds[1..] {
        let g = gain(s);
        if g > best_gain * (1.0 + 1e-12) {
            best = *s;
            best_gain = g;
        }
    }
    if policy == WeightPolicy::Shots {
        return Ok(best);
    }
    // Pattern search on the sphere around the best seed.
    let mut step = 0.05;
    while step > 1e-10 {
        let (u, v) = tangent_frame(&best);
        let mut improved = false;
        for (a, b) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let cand = (best + (u * a + v * b) * step).normalize();
            let g = gain(&cand);
            if g > best_gain * (1.0 + 1e-14) {
                best = cand;
                best_gain = g;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(best)
}

fn tangent_frame(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    (u, v)
}

/// Where stage-2 measurements come from.
#[derive(Debug, Clone)]
pub enum CandidateSet {
    /// Pick among a fixed list by trace gain.
    Finite(Vec<Povm>),
    /// Optimize the qubit measurement direction over the Bloch sphere.
    QubitContinuum,
}

/// One row of the protocol trace. Step 0 is the batch stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub copies_used: u64,
    pub trace_q: f64,
    pub mse: f64,
    pub povm: String,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub estimate: DensityMatrix,
    pub steps: Vec<StepDiagnostics>,
}

/// Splits `copies` over `povms` as evenly as possible, earlier POVMs taking the remainder.
pub fn even_allocation(copies: u64, povms: usize) -> Vec<u64> {
    let base = copies / povms as u64;
    let extra = (copies % povms as u64) as usize;
    (0..povms).map(|k| base + u64::from(k < extra)).collect()
}

fn batch_cube<R: Rng + ?Sized>(
    truth: &DensityMatrix,
    copies: u64,
    basis: &HermitianBasis,
    policy: WeightPolicy,
    rng: &mut R,
) -> Result<(RegressionProblem, ThetaVector)> {
    let povms = cube_povms(truth.dim())?;
    if copies < povms.len() as u64 {
        return Err(Error::InvalidArgument(format!("{copies} copies cannot cover {} cube bases", povms.len())));
    }
    let mut records = Vec::new();
    for (p, n) in povms.iter().zip(even_allocation(copies, povms.len())) {
        records.extend(simulate_measurements_with(truth, p, basis, n, rng)?);
    }
    let problem = build_regression(&records, truth.dim(), basis, policy)?;
    let theta = solve_weighted_ls(&problem)?;
    Ok((problem, theta))
}

fn physical_estimate(theta: &ThetaVector, basis: &HermitianBasis) -> Result<DensityMatrix> {
    Ok(project_physical(&rho_from_theta(theta, basis)?)?.0)
}

/// Two-stage protocol: batch regression on `N₁` cube-basis copies, then `K` rounds of
/// (select measurement → simulate `N₂` copies → recursive update per element).
pub fn run_adaptive_protocol(
    truth: &DensityMatrix,
    schedule: &AdaptiveSchedule,
    candidates: &CandidateSet,
    policy: WeightPolicy,
    seed: u64,
) -> Result<AdaptiveRun> {
    let d = truth.dim();
    let basis = gell_mann_basis(d)?;
    if let CandidateSet::Finite(list) = candidates {
        if list.is_empty() {
            return Err(Error::InvalidArgument("no candidate measurements".into()));
        }
    }
    let mut rng = rng_from_seed(seed);
    let (problem, theta0) = batch_cube(truth, schedule.stage1, &basis, policy, &mut rng)?;
    let mut state = rls_init_from_batch(&problem, &theta0)?;
    state.copies_used = schedule.stage1;
    let mut steps = vec![StepDiagnostics {
        step: 0,
        copies_used: state.copies_used,
        trace_q: state.trace_q(),
        mse: mse(&physical_estimate(&state.theta, &basis)?, truth)?,
        povm: "cube".into(),
    }];
    for k in 1..=schedule.steps {
        let povm = match candidates {
            CandidateSet::Finite(list) => {
                list[select_next_povm(&state, list, &basis, policy, schedule.per_step)?].clone()
            }
            CandidateSet::QubitContinuum => optimal_qubit_basis(&state, policy, schedule.per_step)?,
        };
        let records = simulate_measurements_with(truth, &povm, &basis, schedule.per_step, &mut rng)?;
        for rec in &records {
            state = rls_update(&state, rec, policy.weight(rec.shots, rec.frequency()))?;
        }
        state.step = k;
        state.copies_used += schedule.per_step;
        steps.push(StepDiagnostics {
            step: k,
            copies_used: state.copies_used,
            trace_q: state.trace_q(),
            mse: mse(&physical_estimate(&state.theta, &basis)?, truth)?,
            povm: povm.label().to_string(),
        });
    }
    Ok(AdaptiveRun { estimate: physical_estimate(&state.theta, &basis)?, steps })
}

/// Non-adaptive baseline: all `copies` spread evenly over the cube bases, one batch solve.
pub fn run_static_protocol(
    truth: &DensityMatrix,
    copies: u64,
    policy: WeightPolicy,
    seed: u64,
) -> Result<DensityMatrix> {
    let basis = gell_mann_basis(truth.dim())?;
    let mut rng = rng_from_seed(seed);
    let (_, theta) = batch_cube(truth, copies, &basis, policy, &mut rng)?;
    physical_estimate(&theta, &basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gell_mann_basis;
    use crate::lre::{tomography_pipeline, WeightPolicy};
    use crate::model::{
        cube_povm, haar_pure_state, haar_unitary, random_mixed_state, simulate_measurements_with, SimRng,
    };

    fn dataset(truth: &DensityMatrix, povms: &[Povm], rng: &mut SimRng) -> Vec<MeasurementRecord> {
        let b = gell_mann_basis(truth.dim()).unwrap();
        povms
            .iter()
            .flat_map(|p| {
                let shots = rng.random_range(10..=10_000);
                simulate_measurements_with(truth, p, &b, shots, rng).unwrap()
            })
            .collect()
    }

    fn state_from(records: &[MeasurementRecord], d: usize, policy: WeightPolicy) -> RecursiveState {
        let b = gell_mann_basis(d).unwrap();
        let prob = build_regression(records, d, &b, policy).unwrap();
        let th = solve_weighted_ls(&prob).unwrap();
        rls_init_from_batch(&prob, &th).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn recursion_reproduces_batch() {
        let mut rng = rng_from_seed(1);
        for policy in [WeightPolicy::Shots, WeightPolicy::InverseVariance] {
            let truth = random_mixed_state(2, &mut rng);
            let mut povms = cube_povms(2).unwrap();
            for _ in 0..5 {
                let u = haar_unitary(2, &mut rng);
                povms.push(Povm::projective("rand", &u).unwrap());
            }
            let recs = dataset(&truth, &povms, &mut rng);
            let mut state = state_from(&recs[..6], 2, policy);
            for r in &recs[6..] {
                state = rls_update(&state, r, policy.weight(r.shots, r.frequency())).unwrap();
            }
            let b = gell_mann_basis(2).unwrap();
            let batch = solve_weighted_ls(&build_regression(&recs, 2, &b, policy).unwrap()).unwrap();
            assert!(rel_err(&state.theta.values, &batch.values) < 1e-10);
        }
    }

    #[test]
    fn batch_q_is_diagonal_for_qubit_cube() {
        let b = gell_mann_basis(2).unwrap();
        let truth = DensityMatrix::maximally_mixed(2);
        let recs: Vec<_> = cube_povms(2)
            .unwrap()
            .iter()
            .flat_map(|p| crate::model::simulate_measurements(&truth, p, &b, 50, 1).unwrap())
            .collect();
        let st = state_from(&recs, 2, WeightPolicy::Shots);
        // Each axis: two rows with Γ = ±e_i/√2 and weight 50 → information 50 per axis.
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / 50.0 } else { 0.0 };
                assert!((st.q[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ridge_limit_matches_batch_q() {
        let mut rng = rng_from_seed(2);
        let truth = random_mixed_state(2, &mut rng);
        let recs = dataset(&truth, &cube_povms(2).unwrap(), &mut rng);
        let batch = state_from(&recs, 2, WeightPolicy::Shots);
        let mut st =
            RecursiveState { q: DMatrix::identity(3, 3) * 1e8, theta: ThetaVector::zeros(2), step: 0, copies_used: 0 };
        for r in &recs {
            st = rls_update(&st, r, r.shots as f64).unwrap();
        }
        assert!((st.q - batch.q).abs().max() < 1e-6);
    }

    #[test]
    fn single_row_is_singular() {
        let b = gell_mann_basis(2).unwrap();
        let truth = DensityMatrix::maximally_mixed(2);
        let recs = crate::model::simulate_measurements(&truth, &cube_povm("z").unwrap(), &b, 10, 1).unwrap();
        let prob = build_regression(&recs[..1], 2, &b, WeightPolicy::Shots).unwrap();
        assert!(matches!(rls_init_from_batch(&prob, &ThetaVector::zeros(2)), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn null_direction_update_is_inert() {
        let st = RecursiveState {
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.0])),
            theta: ThetaVector { dim: 2, values: vec![0.1, 0.2, 0.3] },
            step: 0,
            copies_used: 0,
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // Γ along the third axis with zero residual: p̂ = 1/2 + s·0.3.
        let rec = MeasurementRecord {
            povm: "z".into(),
            element: 0,
            shots: 1,
            successes: 1,
            gamma0: 1.0,
            gamma: vec![0.0, 0.0, s],
        };
        let next = rls_update_with_frequency(&st, &rec, 0.5 + s * 0.3, 7.0).unwrap();
        assert_eq!(next.q, st.q);
        assert_eq!(next.theta, st.theta);
        assert_eq!(trace_gain(&st, &rec.gamma, 7.0), 0.0);
    }

    #[test]
    fn gain_identity_and_monotone_trace() {
        let mut rng = rng_from_seed(3);
        let truth = random_mixed_state(3, &mut rng);
        let povms = crate::model::pairwise_povms(3).unwrap();
        let recs = dataset(&truth, &povms, &mut rng);
        let mut st = state_from(&recs, 3, WeightPolicy::Shots);
        for r in &recs {
            let w = r.shots as f64;
            let g = trace_gain(&st, &r.gamma, w);
            let next = rls_update(&st, r, w).unwrap();
            let actual = st.trace_q() - next.trace_q();
            assert!((g - actual).abs() <= 1e-12 * st.trace_q().max(1.0));
            assert!(next.trace_q() <= st.trace_q() + 1e-15);
            assert!(next.q.clone().symmetric_eigen().eigenvalues.min() >= -1e-9);
            st = next;
        }
    }

    #[test]
    fn gain_prefers_the_uncertain_direction() {
        let st = RecursiveState {
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1, 0.01])),
            theta: ThetaVector::zeros(2),
            step: 0,
            copies_used: 0,
        };
        let top = trace_gain(&st, &[1.0, 0.0, 0.0], 5.0);
        let bottom = trace_gain(&st, &[0.0, 0.0, 1.0], 5.0);
        // closed forms: 5·1/(1+5) and 5·1e-4/(1+0.05)
        assert!((top - 5.0 / 6.0).abs() < 1e-15);
        assert!((bottom - 5e-4 / 1.05).abs() < 1e-15);
        assert!(top > bottom);
    }

    #[test]
    fn selection_after_many_z_shots_is_x() {
        let b = gell_mann_basis(2).unwrap();
        let mut rng = rng_from_seed(4);
        let truth = DensityMatrix::from_pure(&haar_pure_state(2, &mut rng));
        let recs: Vec<_> = cube_povms(2)
            .unwrap()
            .iter()
            .flat_map(|p| simulate_measurements_with(&truth, p, &b, 20, &mut rng).unwrap())
            .collect();
        let mut st = state_from(&recs, 2, WeightPolicy::Shots);
        let z = cube_povm("z").unwrap();
        for _ in 0..1000 {
            for r in simulate_measurements_with(&truth, &z, &b, 1, &mut rng).unwrap() {
                st = rls_update(&st, &r, 1.0).unwrap();
            }
        }
        let cands = vec![cube_povm("x").unwrap(), z.clone()];
        assert_eq!(select_next_povm(&st, &cands, &b, WeightPolicy::Shots, 100).unwrap(), 0);
        let swapped = vec![z, cube_povm("x").unwrap()];
        assert_eq!(select_next_povm(&st, &swapped, &b, WeightPolicy::Shots, 100).unwrap(), 1);
        assert_eq!(select_next_povm(&st, &swapped[..1], &b, WeightPolicy::Shots, 100).unwrap(), 0);
        assert!(select_next_povm(&st, &[], &b, WeightPolicy::Shots, 100).is_err());
    }

    #[test]
    fn update_order_within_a_round_does_not_matter() {
        let mut rng = rng_from_seed(5);
        let b = gell_mann_basis(4).unwrap();
        let truth = random_mixed_state(4, &mut rng);
        let recs: Vec<_> = cube_povms(4)
            .unwrap()
            .iter()
            .flat_map(|p| simulate_measurements_with(&truth, p, &b, 400, &mut rng).unwrap())
            .collect();
        let st = state_from(&recs, 4, WeightPolicy::Shots);
        let round = simulate_measurements_with(&truth, &cube_povm("xy").unwrap(), &b, 300, &mut rng).unwrap();
        let fwd = round.iter().try_fold(st.clone(), |s, r| rls_update(&s, r, 300.0)).unwrap();
        let rev = round.iter().rev().try_fold(st, |s, r| rls_update(&s, r, 300.0)).unwrap();
        for (a, bb) in fwd.theta.values.iter().zip(&rev.theta.values) {
            assert!((a - bb).abs() < 1e-9);
        }
    }

    fn angle(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        a.normalize().dot(&b.normalize()).abs().min(1.0).acos()
    }

    #[test]
    fn isotropic_q_returns_x_axis() {
        let st =
            RecursiveState { q: DMatrix::identity(3, 3) * 0.3, theta: ThetaVector::zeros(2), step: 0, copies_used: 0 };
        let n = optimal_qubit_direction(&st, WeightPolicy::Shots, 100).unwrap();
        assert!(angle(&n, &Vector3::x()) < 1e-12);
        let povm = optimal_qubit_basis(&st, WeightPolicy::Shots, 100).unwrap();
        assert_eq!(povm, bloch_povm(&Vector3::x()).unwrap());
    }

    #[test]
    fn continuum_optimum_matches_grid_search() {
        let st = RecursiveState {
            q: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.1, 0.01])),
            theta: ThetaVector::zeros(2),
            step: 0,
            copies_used: 0,
        };
        let n = optimal_qubit_direction(&st, WeightPolicy::Shots, 100).unwrap();
        assert!(angle(&n, &Vector3::x()) < 1e-6);
        // grid oracle over 10⁴ directions
        let count = 10_000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let mut best = (f64::NEG_INFINITY, Vector3::zeros());
        for i in 0..count {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let v = Vector3::new(r * (golden * i as f64).cos(), r * (golden * i as f64).sin(), z);
            let g = bloch_gain(&st, &v, WeightPolicy::Shots, 100);
            if g > best.0 {
                best = (g, v);
            }
        }
        assert!(angle(&best.1, &Vector3::x()) < 0.05);
        assert!(bloch_gain(&st, &n, WeightPolicy::Shots, 100) >= best.0);
    }

    #[test]
    fn continuum_beats_every_cube_basis() {
        let b = gell_mann_basis(2).unwrap();
        let mut rng = rng_from_seed(6);
        for policy in [WeightPolicy::Shots, WeightPolicy::InverseVariance] {
            for _ in 0..30 {
                let truth = DensityMatrix::from_pure(&haar_pure_state(2, &mut rng));
                let recs = dataset(&truth, &cube_povms(2).unwrap(), &mut rng);
                let st = state_from(&recs, 2, policy);
                let best = optimal_qubit_basis(&st, policy, 500).unwrap();
                let g_best = povm_gain(&st, &best, &b, policy, 500);
                for p in cube_povms(2).unwrap() {
                    assert!(g_best >= povm_gain(&st, &p, &b, policy, 500) * (1.0 - 1e-9));
                }
            }
        }
    }

    #[test]
    fn bloch_povm_axes_match_cube() {
        for (n, label) in [(Vector3::x(), "x"), (Vector3::y(), "y"), (Vector3::z(), "z")] {
            let a = bloch_povm(&n).unwrap();
            let cb = cube_povm(label).unwrap();
            for (e, f) in a.elements().iter().zip(cb.elements()) {
                assert!(crate::linalg::frobenius(&(e - f)) < 1e-12);
            }
        }
    }

    #[test]
    fn schedule_validation() {
        let s = AdaptiveSchedule::new(10_000, 2_000, 8).unwrap();
        assert_eq!(s.per_step, 1_000);
        assert_eq!(s.stage1 + s.steps as u64 * s.per_step, s.total);
        assert!(AdaptiveSchedule::new(10_000, 2_000, 7).is_err());
        assert!(AdaptiveSchedule::new(100, 0, 1).is_err());
        assert!(AdaptiveSchedule::new(100, 100, 0).is_ok());
        assert!(AdaptiveSchedule::new(100, 50, 0).is_err());
    }

    #[test]
    fn zero_steps_equals_batch_pipeline() {
        let mut rng = rng_from_seed(7);
        let truth = DensityMatrix::from_pure(&haar_pure_state(2, &mut rng));
        let sched = AdaptiveSchedule::new(3_000, 3_000, 0).unwrap();
        let run =
            run_adaptive_protocol(&truth, &sched, &CandidateSet::QubitContinuum, WeightPolicy::Shots, 42).unwrap();
        let b = gell_mann_basis(2).unwrap();
        let mut rng = rng_from_seed(42);
        let recs: Vec<_> = cube_povms(2)
            .unwrap()
            .iter()
            .flat_map(|p| simulate_measurements_with(&truth, p, &b, 1_000, &mut rng).unwrap())
            .collect();
        let batch = tomography_pipeline(&recs, 2, &b, WeightPolicy::Shots).unwrap();
        assert!(crate::linalg::frobenius(&(run.estimate.matrix() - batch.state.matrix())) < 1e-12);
        assert_eq!(run.steps.len(), 1);
    }

    #[test]
    fn protocol_trace_is_non_increasing() {
        let mut rng = rng_from_seed(8);
        let sched = AdaptiveSchedule::new(10_000, 2_000, 8).unwrap();
        for cands in [CandidateSet::Finite(cube_povms(2).unwrap()), CandidateSet::QubitContinuum] {
            for policy in [WeightPolicy::Shots, WeightPolicy::InverseVariance] {
                let truth = DensityMatrix::from_pure(&haar_pure_state(2, &mut rng));
                let run = run_adaptive_protocol(&truth, &sched, &cands, policy, rng.random()).unwrap();
                assert_eq!(run.steps.len(), 9);
                assert_eq!(run.steps.last().unwrap().copies_used, 10_000);
                for w in run.steps.windows(2) {
                    assert!(w[1].trace_q <= w[0].trace_q + 1e-15);
                }
            }
        }
    }

    #[test]
    fn continuum_rejects_qutrits() {
        let st = RecursiveState { q: DMatrix::identity(8, 8), theta: ThetaVector::zeros(3), step: 0, copies_used: 0 };
        assert!(matches!(optimal_qubit_basis(&st, WeightPolicy::Shots, 10), Err(Error::Unsupported(_))));
    }
}
