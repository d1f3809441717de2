// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Sampling-based learning control for systems with uncertain parameters, plus a two-level
//! sliding-domain check driven by periodic projective measurements.
//!
//! The controlled Hamiltonian is `H(t) = ω H₀ + θ Σₘ uₘ(t) Hₘ` with `ω ∈ [1−Ω, 1+Ω]` and
//! `θ ∈ [1−Θ, 1+Θ]`. Controls are piecewise constant over `L` equal intervals of `[0, T]`.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, expm_from_eigh, hermitize, is_hermitian, CMatrix, CVector, C64};
use crate::model::{rng_from_seed, PureState, SimRng};

/// `(ω, θ)`.
pub type Sample = (f64, f64);

/// Nominal model plus the uncertainty rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainSystem {
    dim: usize,
    h0: CMatrix,
    controls: Vec<CMatrix>,
    omega_halfwidth: f64,
    theta_halfwidth: f64,
}

impl UncertainSystem {
    pub fn new(h0: CMatrix, controls: Vec<CMatrix>, omega_halfwidth: f64, theta_halfwidth: f64) -> Result<Self> {
        let d = h0.nrows();
        if d < 2 {
            return Err(Error::InvalidDimension(format!("need d >= 2, got {d}")));
        }
        if controls.is_empty() {
            return Err(Error::InvalidArgument("at least one control Hamiltonian is required".into()));
        }
        for (k, h) in std::iter::once(&h0).chain(&controls).enumerate() {
            if h.nrows() != d || h.ncols() != d {
                return Err(Error::DimensionMismatch(format!("Hamiltonian {k} is not {d}x{d}")));
            }
            if !is_hermitian(h, 1e-10) {
                return Err(Error::ContractViolation(format!("Hamiltonian {k} is not Hermitian")));
            }
        }
        for (name, w) in [("omega", omega_halfwidth), ("theta", theta_halfwidth)] {
            if !(0.0..1.0).contains(&w) {
                return Err(Error::InvalidArgument(format!("{name} half-width must lie in [0, 1), got {w}")));
            }
        }
        Ok(Self { dim: d, h0, controls, omega_halfwidth, theta_halfwidth })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn controls(&self) -> &[CMatrix] {
        &self.controls
    }

    pub fn omega_halfwidth(&self) -> f64 {
        self.omega_halfwidth
    }

    pub fn theta_halfwidth(&self) -> f64 {
        self.theta_halfwidth
    }

    /// Same Hamiltonians with a different uncertainty rectangle.
    pub fn with_halfwidths(&self, omega_halfwidth: f64, theta_halfwidth: f64) -> Result<Self> {
        Self::new(self.h0.clone(), self.controls.clone(), omega_halfwidth, theta_halfwidth)
    }

    pub fn contains(&self, (omega, theta): Sample) -> bool {
        let tol = 1e-12;
        (omega - 1.0).abs() <= self.omega_halfwidth + tol && (theta - 1.0).abs() <= self.theta_halfwidth + tol
    }

    /// `ω H₀ + θ Σₘ uₘ Hₘ` for one interval's amplitudes.
    pub fn hamiltonian(&self, (omega, theta): Sample, amplitudes: &[f64]) -> CMatrix {
        let mut h = self.h0.scale(omega);
        for (u, hm) in amplitudes.iter().zip(&self.controls) {
            h += hm.scale(theta * u);
        }
        hermitize(&h)
    }
}

/// Piecewise-constant amplitudes, one row per interval and one column per control channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    horizon: f64,
    amplitudes: DMatrix<f64>,
    bound: Option<f64>,
}

impl ControlField {
    pub fn new(horizon: f64, amplitudes: DMatrix<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if amplitudes.nrows() == 0 || amplitudes.ncols() == 0 {
            return Err(Error::InvalidArgument("a field needs at least one interval and one channel".into()));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("amplitudes must be finite".into()));
        }
        Ok(Self { horizon, amplitudes, bound: None })
    }

    pub fn constant(horizon: f64, intervals: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(horizon, DMatrix::from_element(intervals, channels, value))
    }

    /// Uniform amplitudes in `[−scale, scale]`.
    pub fn random(horizon: f64, intervals: usize, channels: usize, scale: f64, rng: &mut SimRng) -> Result<Self> {
        Self::new(horizon, DMatrix::from_fn(intervals, channels, |_, _| rng.random_range(-scale..=scale)))
    }

    /// Clips every amplitude to `[−bound, bound]`, now and after each training step.
    pub fn with_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::InvalidArgument(format!("amplitude bound must be positive, got {bound}")));
        }
        self.bound = Some(bound);
        self.amplitudes.apply(|a| *a = a.clamp(-bound, bound));
        Ok(self)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn channels(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.intervals() as f64
    }

    pub fn amplitudes(&self) -> &DMatrix<f64> {
        &self.amplitudes
    }

    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    fn row(&self, k: usize) -> Vec<f64> {
        self.amplitudes.row(k).iter().copied().collect()
    }

    fn stepped(&self, direction: &DMatrix<f64>, eta: f64) -> Self {
        let mut next = self.clone();
        next.amplitudes += direction * eta;
        if let Some(b) = self.bound {
            next.amplitudes.apply(|a| *a = a.clamp(-b, b));
        }
        next
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleScheme {
    Grid,
    Random,
}

/// Training or testing points inside the uncertainty rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub pairs: Vec<Sample>,
    pub scheme: SampleScheme,
}

fn linspace(center: f64, half: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![center];
    }
    (0..n).map(|i| center - half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

impl SampleSet {
    pub fn new(system: &UncertainSystem, pairs: Vec<Sample>, scheme: SampleScheme) -> Result<Self> {
        if let Some(p) = pairs.iter().find(|p| !system.contains(**p)) {
            return Err(Error::InvalidArgument(format!("sample {p:?} lies outside the uncertainty rectangle")));
        }
        Ok(Self { pairs, scheme })
    }

    /// `n_ω × n_θ` evenly spaced points including the edges (a single point sits at the centre).
    pub fn grid(system: &UncertainSystem, n_omega: usize, n_theta: usize) -> Result<Self> {
        if n_omega == 0 || n_theta == 0 {
            return Err(Error::InvalidArgument("grid sizes must be positive".into()));
        }
        let omegas = linspace(1.0, system.omega_halfwidth, n_omega);
        let thetas = linspace(1.0, system.theta_halfwidth, n_theta);
        let pairs = omegas.iter().flat_map(|&w| thetas.iter().map(move |&t| (w, t))).collect();
        Ok(Self { pairs, scheme: SampleScheme::Grid })
    }

    /// The four corners of the rectangle and its centre.
    pub fn corners_and_center(system: &UncertainSystem) -> Self {
        let (a, b) = (system.omega_halfwidth, system.theta_halfwidth);
        let pairs = vec![(1.0 - a, 1.0 - b), (1.0 - a, 1.0 + b), (1.0, 1.0), (1.0 + a, 1.0 - b), (1.0 + a, 1.0 + b)];
        Self { pairs, scheme: SampleScheme::Grid }
    }

    pub fn random(system: &UncertainSystem, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        let mut rng = rng_from_seed(seed);
        let (a, b) = (system.omega_halfwidth, system.theta_halfwidth);
        let pairs =
            (0..n).map(|_| (1.0 + a * rng.random_range(-1.0..=1.0), 1.0 + b * rng.random_range(-1.0..=1.0))).collect();
        Ok(Self { pairs, scheme: SampleScheme::Random })
    }

    pub fn nominal() -> Self {
        Self { pairs: vec![(1.0, 1.0)], scheme: SampleScheme::Grid }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn check_dims(system: &UncertainSystem, field: &ControlField, states: &[&PureState]) -> Result<()> {
    if field.channels() != system.controls.len() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} channels, system has {} controls",
            field.channels(),
            system.controls.len()
        )));
    }
    if let Some(s) = states.iter().find(|s| s.dim() != system.dim) {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs system dimension {}",
            s.dim(),
            system.dim
        )));
    }
    Ok(())
}

/// Interval propagators `U_k = exp(−i H_k Δt)` with the eigendecompositions behind them.
struct Steps {
    eig: Vec<(Vec<f64>, CMatrix)>,
    unitaries: Vec<CMatrix>,
}

fn steps(system: &UncertainSystem, sample: Sample, field: &ControlField) -> Steps {
    let dt = field.dt();
    let eig: Vec<(Vec<f64>, CMatrix)> =
        (0..field.intervals()).map(|k| eigh(&system.hamiltonian(sample, &field.row(k)))).collect();
    let unitaries = eig.iter().map(|(vals, vecs)| expm_from_eigh(vals, vecs, dt)).collect();
    Steps { eig, unitaries }
}

/// `ψ(T)` for one parameter sample.
pub fn propagate(
    system: &UncertainSystem,
    sample: Sample,
    field: &ControlField,
    psi0: &PureState,
) -> Result<PureState> {
    check_dims(system, field, &[psi0])?;
    let s = steps(system, sample, field);
    let out = s.unitaries.iter().fold(psi0.amplitudes().clone(), |psi, u| u * psi);
    Ok(PureState::new_unchecked(out))
}

/// `|⟨ψ(T)|ψ_target⟩|²`.
pub fn fidelity_j(
    system: &UncertainSystem,
    sample: Sample,
    field: &ControlField,
    psi0: &PureState,
    target: &PureState,
) -> Result<f64> {
    check_dims(system, field, &[psi0, target])?;
    Ok(propagate(system, sample, field, psi0)?.inner(target).norm_sqr())
}

/// Mean fidelity over the samples.
pub fn augmented_j(
    system: &UncertainSystem,
    samples: &SampleSet,
    field: &ControlField,
    psi0: &PureState,
    target: &PureState,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("sample set is empty".into()));
    }
    let fids: Vec<f64> =
        samples.pairs.par_iter().map(|&s| fidelity_j(system, s, field, psi0, target)).collect::<Result<_>>()?;
    Ok(fids.iter().sum::<f64>() / fids.len() as f64)
}

/// How `∂J/∂u` is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum GradientMode {
    /// Central differences with step `h`.
    FiniteDifference { h: f64 },
    /// Exact derivative of each interval propagator through its eigendecomposition.
    #[default]
    Analytic,
    /// `∂U_k/∂u_km ≈ −iΔt θ Hₘ U_k`, accurate to first order in `Δt`.
    FirstOrder,
}

/// Derivative of `exp(−iHΔt)` along `E`: `V (K ∘ V†EV) V†` with the divided differences
/// `K_ab = (e^{−iλ_aΔt} − e^{−iλ_bΔt}) / (λ_a − λ_b)`, expanded about the midpoint on (near) ties.
fn expm_derivative(values: &[f64], vectors: &CMatrix, e: &CMatrix, dt: f64) -> CMatrix {
    let n = values.len();
    let phase: Vec<C64> = values.iter().map(|&l| C64::from_polar(1.0, -dt * l)).collect();
    let mut inner = vectors.adjoint() * e * vectors;
    for a in 0..n {
        for b in 0..n {
            let gap = values[a] - values[b];
            let k = if gap.abs() * dt > 1e-8 {
                (phase[a] - phase[b]) / gap
            } else {
                // second-order expansion about the midpoint keeps ties smooth
                let mid = C64::from_polar(1.0, -dt * 0.5 * (values[a] + values[b]));
                c(0.0, -dt) * mid * (1.0 - (gap * dt).powi(2) / 24.0)
            };
            inner[(a, b)] *= k;
        }
    }
    vectors * inner * vectors.adjoint()
}

fn sample_gradient(
    system: &UncertainSystem,
    sample: Sample,
    field: &ControlField,
    psi0: &PureState,
    target: &PureState,
    mode: GradientMode,
) -> Result<DMatrix<f64>> {
    let (l, m) = (field.intervals(), field.channels());
    if let GradientMode::FiniteDifference { h } = mode {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
        }
        let mut g = DMatrix::zeros(l, m);
        for k in 0..l {
            for ch in 0..m {
                let mut plus = field.clone();
                plus.amplitudes[(k, ch)] += h;
                let mut minus = field.clone();
                minus.amplitudes[(k, ch)] -= h;
                let jp = fidelity_j(system, sample, &plus, psi0, target)?;
                let jm = fidelity_j(system, sample, &minus, psi0, target)?;
                g[(k, ch)] = (jp - jm) / (2.0 * h);
            }
        }
        return Ok(g);
    }
    let dt = field.dt();
    let s = steps(system, sample, field);
    // forward[k] = U_k ⋯ U_1 ψ₀ (forward[0] = ψ₀); backward[k] = U_{k+1}† ⋯ U_L† φ.
    let mut forward: Vec<CVector> = Vec::with_capacity(l + 1);
    forward.push(psi0.amplitudes().clone());
    for u in &s.unitaries {
        let next = u * forward.last().expect("non-empty");
        forward.push(next);
    }
    let mut backward: Vec<CVector> = vec![CVector::zeros(system.dim); l + 1];
    backward[l] = target.amplitudes().clone();
    for k in (0..l).rev() {
        backward[k] = s.unitaries[k].adjoint() * &backward[k + 1];
    }
    let overlap = target.amplitudes().dotc(&forward[l]);
    let theta = sample.1;
    let mut g = DMatrix::zeros(l, m);
    for k in 0..l {
        let (vals, vecs) = &s.eig[k];
        for ch in 0..m {
            let e = system.controls[ch].scale(theta);
            let du = match mode {
                GradientMode::Analytic => expm_derivative(vals, vecs, &e, dt),
                _ => e * &s.unitaries[k] * c(0.0, -dt),
            };
            let da = backward[k + 1].dotc(&(du * &forward[k]));
            g[(k, ch)] = 2.0 * (overlap.conj() * da).re;
        }
    }
    Ok(g)
}

/// `∇J_N`, the mean of the per-sample gradients.
pub fn gradient_j(
    system: &UncertainSystem,
    samples: &SampleSet,
    field: &ControlField,
    psi0: &PureState,
    target: &PureState,
    mode: GradientMode,
) -> Result<DMatrix<f64>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("sample set is empty".into()));
    }
    check_dims(system, field, &[psi0, target])?;
    let grads: Vec<DMatrix<f64>> = samples
        .pairs
        .par_iter()
        .map(|&s| sample_gradient(system, s, field, psi0, target, mode))
        .collect::<Result<_>>()?;
    let n = grads.len() as f64;
    let sum = grads.into_iter().fold(DMatrix::zeros(field.intervals(), field.channels()), |acc, g| acc + g);
    Ok(sum / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub step: f64,
    pub iterations: usize,
    pub tolerance: f64,
    #[serde(default = "default_halvings")]
    pub max_halvings: u32,
    #[serde(default)]
    pub gradient: GradientMode,
}

fn default_halvings() -> u32 {
    30
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            iterations: 500,
            tolerance: 1e-10,
            max_halvings: default_halvings(),
            gradient: GradientMode::Analytic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    IterationCap,
    Tolerance,
    /// No halving of the step improved `J_N`.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub field: ControlField,
    /// `J_N` before the first step and after every accepted step.
    pub log: Vec<f64>,
    pub stop: StopReason,
}

/// Gradient ascent on `J_N` with step halving until the objective improves.
pub fn slc_train(
    system: &UncertainSystem,
    samples: &SampleSet,
    field0: &ControlField,
    psi0: &PureState,
    target: &PureState,
    config: &TrainConfig,
) -> Result<TrainResult> {
    if !(config.step > 0.0) || !(config.tolerance >= 0.0) {
        return Err(Error::InvalidArgument("step must be positive and tolerance non-negative".into()));
    }
    let mut field = field0.clone();
    let mut j = augmented_j(system, samples, &field, psi0, target)?;
    let mut log = vec![j];
    let mut stop = StopReason::IterationCap;
    'outer: for _ in 0..config.iterations {
        let g = gradient_j(system, samples, &field, psi0, target, config.gradient)?;
        let mut eta = config.step;
        for _ in 0..=config.max_halvings {
            let candidate = field.stepped(&g, eta);
            let jc = augmented_j(system, samples, &candidate, psi0, target)?;
            if jc > j {
                let delta = jc - j;
                field = candidate;
                j = jc;
                log.push(j);
                if delta < config.tolerance {
                    stop = StopReason::Tolerance;
                    break 'outer;
                }
                continue 'outer;
            }
            eta *= 0.5;
        }
        stop = StopReason::Stalled;
        break;
    }
    Ok(TrainResult { field, log, stop })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestStats {
    pub mean: f64,
    pub min: f64,
    /// `(ω, θ, fidelity)` in sample order.
    pub per_sample: Vec<(f64, f64, f64)>,
}

/// Evaluates a fixed control on unseen samples.
pub fn slc_test(
    system: &UncertainSystem,
    field: &ControlField,
    samples: &SampleSet,
    psi0: &PureState,
    target: &PureState,
) -> Result<TestStats> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("test sample set is empty".into()));
    }
    let per_sample: Vec<(f64, f64, f64)> = samples
        .pairs
        .par_iter()
        .map(|&(w, t)| Ok((w, t, fidelity_j(system, (w, t), field, psi0, target)?)))
        .collect::<Result<_>>()?;
    let mean = per_sample.iter().map(|p| p.2).sum::<f64>() / per_sample.len() as f64;
    let min = per_sample.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    Ok(TestStats { mean, min, per_sample })
}

/// Sliding-domain parameters for a two-level system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingConfig {
    pub p0: f64,
    pub tau: f64,
}

impl SlidingConfig {
    pub fn new(p0: f64, tau: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::InvalidArgument(format!("p0 must lie in (0, 1), got {p0}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {tau}")));
        }
        Ok(Self { p0, tau })
    }
}

/// `|⟨0|ψ⟩|² ≥ 1 − p₀`.
pub fn in_sliding_domain(psi: &PureState, config: &SlidingConfig) -> Result<bool> {
    if psi.dim() != 2 {
        return Err(Error::Unsupported(format!("sliding domain is defined for qubits, got d = {}", psi.dim())));
    }
    Ok(psi.amplitudes()[0].norm_sqr() >= 1.0 - config.p0)
}

/// Collapse probability per period for `H = ε σx` started in `|0⟩`.
pub fn rabi_leak_probability(eps: f64, tau: f64) -> f64 {
    (eps * tau).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub period: usize,
    /// `|⟨0|ψ⟩|²` just before the measurement.
    pub pre_p0: f64,
    pub pre_in_domain: bool,
    /// Measured σz outcome: `0` for `|0⟩`, `1` for `|1⟩`.
    pub outcome: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoLog {
    pub periods: Vec<PeriodRecord>,
    pub out_of_domain_collapses: usize,
    pub frequency: f64,
}

/// Free evolution under `H_Δ` (free Hamiltonian zero, rotating frame) with a σz measurement
/// every `τ`.
///
/// A collapse onto `|1⟩` leaves the domain for any `p₀ < 1`; the corrective control that
/// would steer the state back is modelled as an instantaneous reset to `|0⟩`, so periods are
/// independent trials. The number of periods is `⌊horizon / τ⌋`.
pub fn periodic_measurement_demo(
    h_delta: &CMatrix,
    config: &SlidingConfig,
    horizon: f64,
    seed: u64,
) -> Result<DemoLog> {
    if h_delta.nrows() != 2 || h_delta.ncols() != 2 {
        return Err(Error::Unsupported("the measurement demo is defined for qubits".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be non-negative, got {horizon}")));
    }
    let u = crate::linalg::herm_expm(h_delta, config.tau)?;
    let n = (horizon / config.tau + 1e-9).floor() as usize;
    let mut rng = rng_from_seed(seed);
    let ground = PureState::basis(2, 0);
    let mut periods = Vec::with_capacity(n);
    let mut outs = 0;
    for period in 0..n {
        let psi = PureState::new_unchecked(&u * ground.amplitudes());
        let pre_p0 = psi.amplitudes()[0].norm_sqr().min(1.0);
        let pre_in_domain = in_sliding_domain(&psi, config)?;
        let outcome = u8::from(rng.random::<f64>() >= pre_p0);
        if outcome == 1 {
            outs += 1;
        }
        periods.push(PeriodRecord { period, pre_p0, pre_in_domain, outcome });
    }
    let frequency = if n == 0 { 0.0 } else { outs as f64 / n as f64 };
    Ok(DemoLog { periods, out_of_domain_collapses: outs, frequency })
}
