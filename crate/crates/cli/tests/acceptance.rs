// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion and exits nonzero
//! if any criterion fails. Every criterion runs even when an earlier one fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use qest_core::adaptive::{rls_init_from_batch, rls_update};
use qest_core::complexity::{complexity_probe, probe_slope, ProbeTarget};
use qest_core::control::{gradient_j, slc_test, slc_train, ControlField, GradientMode, SampleSet, UncertainSystem};
use qest_core::ident::{
    build_b_natural, estimate_lambda, identify_hamiltonian, natural_state_basis, phase_invariant_fidelity, KrausSet,
    LambdaMode,
};
use qest_core::linalg::{c, eigh, frobenius, gell_mann_basis, herm_expm, hermitize, identity, trace, CMatrix};
use qest_core::lre::{
    build_regression, build_regression_with_frequencies, project_physical, reconstruct, solve_weighted_ls,
};
use qest_core::model::{
    derive_seed, exact_records, haar_pure_state, haar_unitary, random_mixed_state, rng_from_seed,
    simulate_measurements_with, standard_povms, DensityMatrix, MeasurementRecord, Povm, SimRng,
};
use qest_core::{MatrixJson, WeightPolicy};
use qest_tool::harness::{
    run_mse_sweep, run_paired_comparison, run_smc, trial_seed, CandidateKind, CompareConfig, Ensemble, SlcConfig,
    SmcConfig, SweepConfig, TomoCompare, TomoStrategy,
};

const SEED: u64 = 20_260_101;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

fn random_hermitian(d: usize, rng: &mut SimRng) -> CMatrix {
    hermitize(&CMatrix::from_fn(d, d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
}

/// Non-projective qubit or qutrit POVM: an even mixture of two random orthonormal bases.
fn mixed_basis_povm(d: usize, rng: &mut SimRng) -> Povm {
    let (u, v) = (haar_unitary(d, rng), haar_unitary(d, rng));
    let mut elems = Vec::new();
    for w in [&u, &v] {
        for k in 0..d {
            let col = w.column(k).into_owned();
            elems.push((&col * col.adjoint()).scale(0.5));
        }
    }
    Povm::new("mix", elems).unwrap()
}

// 1 ---------------------------------------------------------------------------------------------

fn recursive_dataset(d: usize, rng: &mut SimRng) -> (DensityMatrix, Vec<MeasurementRecord>, usize) {
    let basis = gell_mann_basis(d).unwrap();
    let truth = if rng.random::<bool>() {
        DensityMatrix::from_pure(&haar_pure_state(d, rng))
    } else {
        random_mixed_state(d, rng)
    };
    let mut povms = standard_povms(d).unwrap();
    let head: usize = povms.iter().map(Povm::len).sum();
    for k in 0..6 {
        povms.push(if k % 2 == 0 {
            Povm::projective("rand", &haar_unitary(d, rng)).unwrap()
        } else {
            mixed_basis_povm(d, rng)
        });
    }
    let mut records = Vec::new();
    for p in &povms {
        let shots = rng.random_range(10..=10_000);
        records.extend(simulate_measurements_with(&truth, p, &basis, shots, rng).unwrap());
    }
    (truth, records, head)
}

fn criterion_1() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(SEED, 1));
    let mut worst: f64 = 0.0;
    for (d, count) in [(2usize, 100usize), (3, 20)] {
        let basis = gell_mann_basis(d).unwrap();
        for i in 0..count {
            let policy = if i % 2 == 0 { WeightPolicy::Shots } else { WeightPolicy::InverseVariance };
            let (_, records, head) = recursive_dataset(d, &mut rng);
            let first = build_regression(&records[..head], d, &basis, policy).unwrap();
            let mut state = rls_init_from_batch(&first, &solve_weighted_ls(&first).unwrap()).unwrap();
            for r in &records[head..] {
                state = rls_update(&state, r, policy.weight(r.shots, r.frequency())).unwrap();
            }
            let batch = solve_weighted_ls(&build_regression(&records, d, &basis, policy).unwrap()).unwrap();
            worst = worst.max(rel_err(&state.theta.values, &batch.values));
        }
    }
    outcome(worst <= 1e-10, format!("120 datasets, max relative error {worst:.3e} (bound 1e-10)"))
}

// 2 ---------------------------------------------------------------------------------------------

fn random_traceless(d: usize, spectral_norm: f64, rng: &mut SimRng) -> CMatrix {
    let mut h = random_hermitian(d, rng);
    let shift = trace(&h).re / d as f64;
    for k in 0..d {
        h[(k, k)] -= c(shift, 0.0);
    }
    let sn = h.clone().svd(false, false).singular_values.max();
    h.scale(spectral_norm / sn)
}

fn criterion_2() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(SEED, 2));
    let mut tomo_worst: f64 = 0.0;
    for d in [2usize, 3, 4] {
        let basis = gell_mann_basis(d).unwrap();
        for k in 0..20 {
            let truth = if k % 2 == 0 {
                DensityMatrix::from_pure(&haar_pure_state(d, &mut rng))
            } else {
                random_mixed_state(d, &mut rng)
            };
            let mut obs = Vec::new();
            for p in standard_povms(d).unwrap() {
                obs.extend(exact_records(&truth, &p, &basis, 1000).unwrap());
            }
            let problem = build_regression_with_frequencies(&obs, d, &basis, WeightPolicy::Shots).unwrap();
            let est = reconstruct(&problem, &basis).unwrap().state;
            tomo_worst = tomo_worst.max(qest_core::model::mse(&est, &truth).unwrap());
        }
    }

    // ‖H‖₂·t drawn uniformly from (0, 0.9π] with t = 1.
    let t = 1.0;
    let mut draws = Vec::new();
    for d in [2usize, 3] {
        let nb = natural_state_basis(d).unwrap();
        let b = build_b_natural(d);
        for _ in 0..100 {
            let norm = rng.random_range(0.0..0.9 * PI).max(1e-3);
            let h = random_traceless(d, norm, &mut rng);
            let channel = KrausSet::unitary(herm_expm(&h, t).unwrap()).unwrap();
            let lambda = estimate_lambda(&channel, &nb, LambdaMode::Noiseless).unwrap();
            let est = identify_hamiltonian(&lambda, &b, t).unwrap();
            let err = frobenius(&(&est.hamiltonian - &h));
            // A miss is an alias when the estimate generates the same channel with a smaller norm.
            let same_channel =
                phase_invariant_fidelity(&herm_expm(&est.hamiltonian, t).unwrap(), &herm_expm(&h, t).unwrap());
            let est_norm = est.hamiltonian.clone().svd(false, false).singular_values.max();
            draws.push((d, norm, err, same_channel > 1.0 - 1e-9 && est_norm < norm));
        }
    }
    let ok = |e: f64| e <= 1e-6;
    let mut per_dim = Vec::new();
    for d in [2usize, 3] {
        let of_d: Vec<_> = draws.iter().filter(|x| x.0 == d).collect();
        let hit = of_d.iter().filter(|x| ok(x.2)).count();
        let below: Vec<_> = of_d.iter().filter(|x| x.1 < PI / 2.0).collect();
        let below_hit = below.iter().filter(|x| ok(x.2)).count();
        per_dim.push(format!("d={d}: {hit}/{} (‖H‖₂t < π/2: {below_hit}/{})", of_d.len(), below.len()));
    }
    let passed = draws.iter().filter(|x| ok(x.2)).count();
    let misses: Vec<_> = draws.iter().filter(|x| !ok(x.2)).collect();
    let aliased = misses.iter().filter(|x| x.3).count();
    let pass = tomo_worst <= 1e-9 && passed == draws.len();
    outcome(
        pass,
        format!(
            "tomography max MSE {tomo_worst:.3e} (bound 1e-9); identification within 1e-6 in {passed}/{} draws \
             [{}]; {aliased} of {} misses reproduce exp(-iHt) up to phase with a smaller-norm generator",
            draws.len(),
            per_dim.join(", "),
            misses.len()
        ),
    )
}

// 3 ---------------------------------------------------------------------------------------------

/// Projection of `λ` onto the probability simplex by enumerating every support set.
fn simplex_oracle(lambda: &[f64]) -> Vec<f64> {
    let n = lambda.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
        let shift = (idx.iter().map(|&k| lambda[k]).sum::<f64>() - 1.0) / idx.len() as f64;
        let mut x = vec![0.0; n];
        for &k in &idx {
            x[k] = lambda[k] - shift;
        }
        if x.iter().any(|&v| v < -1e-15) {
            continue;
        }
        let dist: f64 = x.iter().zip(lambda).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(d0, _)| dist < *d0) {
            best = Some((dist, x));
        }
    }
    best.expect("the full support with a large shift is always feasible").1
}

fn criterion_3() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(SEED, 3));
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let d = 1 + i % 4;
        let mut m = random_hermitian(d, &mut rng).scale(rng.random_range(0.1..2.0));
        let fix = (1.0 - trace(&m).re) / d as f64;
        m += identity(d).scale(fix);
        let (vals, vecs) = eigh(&m);
        let lam = simplex_oracle(&vals);
        let mut oracle = CMatrix::zeros(d, d);
        for (k, &l) in lam.iter().enumerate() {
            let v = vecs.column(k);
            oracle += (v * v.adjoint()).scale(l);
        }
        let (got, _) = project_physical(&m).unwrap();
        worst = worst.max(frobenius(&(got.matrix() - oracle)));
    }
    outcome(worst <= 1e-10, format!("1000 matrices d ≤ 4, max Frobenius gap {worst:.3e} (bound 1e-10)"))
}

// 4 ---------------------------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let cfg = SweepConfig {
        dim: 2,
        copies: vec![100, 1_000, 10_000, 100_000, 1_000_000],
        ensemble: Ensemble::Pure,
        weights: WeightPolicy::Shots,
    };
    let r = run_mse_sweep(&cfg, derive_seed(SEED, 4), 50).unwrap();
    let slope = r.slope().unwrap();
    let decreasing = r.points.windows(2).all(|w| w[1].mean < w[0].mean);
    let means: Vec<String> = r.points.iter().map(|p| format!("{:.2e}", p.mean)).collect();
    outcome(
        (-1.2..=-0.8).contains(&slope) && decreasing,
        format!(
            "slope {slope:.3} (range [-1.2, -0.8]), means [{}] strictly decreasing: {decreasing}",
            means.join(", ")
        ),
    )
}

// 5 ---------------------------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let weights = WeightPolicy::InverseVariance;
    let cfg = CompareConfig::Tomography(TomoCompare {
        dim: 2,
        copies: 10_000,
        ensemble: Ensemble::Pure,
        a: TomoStrategy::Adaptive { stage1: 2000, steps: 8, candidates: CandidateKind::Continuum, weights },
        b: TomoStrategy::Static { weights },
    });
    let r = run_paired_comparison(&cfg, derive_seed(SEED, 5), 200).unwrap().summary;
    let mean_ok = r.mean_a <= r.mean_b;
    let win_ok = r.win_rate_a >= 0.6;
    outcome(
        mean_ok && win_ok,
        format!(
            "{} trials: adaptive mean MSE {:.3e} vs static {:.3e} (ratio {:.3}, {}), win rate {:.3} (need 0.6, {})",
            r.trials,
            r.mean_a,
            r.mean_b,
            r.ratio,
            if mean_ok { "ok" } else { "too high" },
            r.win_rate_a,
            if win_ok { "ok" } else { "too low" },
        ),
    )
}

// 6 ---------------------------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 4] {
        let b = build_b_natural(d).to_dense();
        let n = b.nrows();
        worst = worst.max(frobenius(&(b.adjoint() * &b - identity(n))));
    }
    outcome(worst <= 1e-9, format!("max ‖B†B − I‖_F {worst:.3e} for d ∈ {{2, 3, 4}} (bound 1e-9)"))
}

// 7 ---------------------------------------------------------------------------------------------

fn criterion_7() -> Outcome {
    let lre = probe_slope(&complexity_probe(ProbeTarget::LreApply, &[2, 4, 8, 16], 7).unwrap()).unwrap();
    let ident = probe_slope(&complexity_probe(ProbeTarget::Identification, &[2, 3, 4, 5, 6], 7).unwrap()).unwrap();
    outcome(
        lre <= 4.5 && ident <= 6.5,
        format!("LRE estimator slope {lre:.2} (bound 4.5), identification slope {ident:.2} (bound 6.5)"),
    )
}

// 8 ---------------------------------------------------------------------------------------------

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn criterion_8() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(SEED, 8));
    let mut worst: f64 = 0.0;
    let mut worst_first_order: f64 = 0.0;
    for i in 0..20 {
        let d = if i < 10 { 2 } else { 3 };
        let h0 = random_hermitian(d, &mut rng);
        let channels = rng.random_range(1..=3);
        let hm = (0..channels).map(|_| random_hermitian(d, &mut rng)).collect();
        let sys = UncertainSystem::new(h0, hm, 0.2, 0.2).unwrap();
        let intervals = rng.random_range(5..=50);
        let field = ControlField::random(rng.random_range(1.0..6.0), intervals, channels, 1.0, &mut rng).unwrap();
        let (a, b) = (haar_pure_state(d, &mut rng), haar_pure_state(d, &mut rng));
        let samples = SampleSet::random(&sys, 4, rng.random()).unwrap();
        let fd = gradient_j(&sys, &samples, &field, &a, &b, GradientMode::FiniteDifference { h: 1e-6 }).unwrap();
        let exact = gradient_j(&sys, &samples, &field, &a, &b, GradientMode::Analytic).unwrap();
        let first = gradient_j(&sys, &samples, &field, &a, &b, GradientMode::FirstOrder).unwrap();
        worst = worst.max(max_abs(&(exact - &fd)));
        worst_first_order = worst_first_order.max(max_abs(&(first - &fd)));
    }
    outcome(
        worst <= 1e-4,
        format!(
            "20 instances, max |analytic − central difference| {worst:.3e} (bound 1e-4); \
             first-order approximation for reference {worst_first_order:.3e}"
        ),
    )
}

// 9 ---------------------------------------------------------------------------------------------

const SLC_TOML: &str = r#"
dim = 2
H0 = { pauli = "z", scale = 0.5 }
Hm = [{ pauli = "x", scale = 0.5 }, { pauli = "y", scale = 0.5 }]
T = 5.0
L = 40
omega_halfwidth = 0.2
theta_halfwidth = 0.2
samples = { scheme = "corners" }
iterations = 300
step = 1.0
tolerance = 1e-10
test = { n = 200, seed = 1 }
"#;

fn criterion_9() -> Outcome {
    let cfg: SlcConfig = toml::from_str(SLC_TOML).unwrap();
    let setup = cfg.setup().unwrap();
    let seed = derive_seed(SEED, 9);
    let trials = 50;
    let rows: Vec<(f64, f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let field0 = cfg.initial_field(derive_seed(s, 0)).unwrap();
            let test = SampleSet::random(&setup.system, 200, derive_seed(s, 2)).unwrap();
            let train = |samples: &SampleSet| {
                slc_train(&setup.system, samples, &field0, &setup.psi0, &setup.target, &setup.train).unwrap()
            };
            let robust = train(&setup.training);
            let nominal = train(&SampleSet::nominal());
            let rt = slc_test(&setup.system, &robust.field, &test, &setup.psi0, &setup.target).unwrap();
            let nt = slc_test(&setup.system, &nominal.field, &test, &setup.psi0, &setup.target).unwrap();
            (*robust.log.last().unwrap(), rt.mean, rt.min, nt.min)
        })
        .collect();
    let ratio_ok = rows.iter().filter(|r| r.1 >= 0.95 * r.0).count();
    let wins = rows.iter().filter(|r| r.2 >= r.3).count();
    let min_ratio = rows.iter().map(|r| r.1 / r.0).fold(f64::INFINITY, f64::min);
    let pass = ratio_ok == trials && wins as f64 >= 0.9 * trials as f64;
    outcome(
        pass,
        format!(
            "{trials} paired trials: mean test fidelity ≥ 0.95·J_N in {ratio_ok} (min ratio {min_ratio:.4}); \
             robust worst case ≥ nominal in {wins} (need 45)"
        ),
    )
}

// 10 --------------------------------------------------------------------------------------------

fn criterion_10() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (k, (p0, eps, leak)) in [(0.05, 1.0, 0.04), (0.1, 0.5, 0.1), (0.2, 2.0, 0.01)].into_iter().enumerate() {
        let tau = f64::sqrt(leak).asin() / eps;
        let cfg = SmcConfig { p0, eps, tau, periods: 10_000 };
        let (_, s) = run_smc(&cfg, derive_seed(derive_seed(SEED, 10), k as u64)).unwrap();
        pass &= s.matches_closed_form && s.within_p0_bound && s.leak_probability <= p0 + 1e-12;
        lines.push(format!("p0={p0} sin²(ετ)={:.4} freq={:.4}±{:.4}", s.leak_probability, s.frequency, s.sigma));
    }
    outcome(pass, format!("10^4 periods each: {}", lines.join("; ")))
}

// 11 --------------------------------------------------------------------------------------------

fn qest(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_qest")).args(args).output().expect("qest runs");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let write = |name: &str, body: &str| {
        let p = root.join(name);
        fs::write(&p, body).unwrap();
        p.to_string_lossy().into_owned()
    };

    let mut rng = rng_from_seed(11);
    let truth = DensityMatrix::from_pure(&haar_pure_state(2, &mut rng));
    let basis = gell_mann_basis(2).unwrap();
    let mut csv = String::from("povm,element,shots,successes\n");
    for p in standard_povms(2).unwrap() {
        for r in simulate_measurements_with(&truth, &p, &basis, 500, &mut rng).unwrap() {
            csv.push_str(&format!("{},{},{},{}\n", r.povm, r.element, r.shots, r.successes));
        }
    }
    let records = write("records.csv", &csv);
    let h = MatrixJson::from_matrix(&random_traceless(2, 1.0, &mut rng));
    let true_h = write("h.json", &serde_json::to_string(&h).unwrap());
    let slc = write("slc.toml", &SLC_TOML.replace("iterations = 300", "iterations = 20").replace("n = 200", "n = 20"));
    let sweep = write("sweep.toml", "dim = 2\ncopies = [100, 1000]\n");
    let tomo_cmp = write(
        "tomo_cmp.toml",
        "kind = \"tomography\"\ndim = 2\ncopies = 2000\n\
         a = { strategy = \"adaptive\", stage1 = 600, steps = 4, candidates = \"continuum\" }\n\
         b = { strategy = \"static\" }\n",
    );
    let ctrl_cmp = write(
        "ctrl_cmp.toml",
        &format!(
            "kind = \"control\"\na = \"robust\"\nb = \"nominal\"\n[system]\n{}",
            SLC_TOML.replace("iterations = 300", "iterations = 10").replace("n = 200", "n = 10")
        ),
    );

    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("tomo", vec!["tomo", "--records", &records, "--dim", "2"]),
        ("adapt", vec!["adapt", "--N", "2000", "--N1", "600", "--K", "4", "--trials", "3"]),
        ("hamid", vec!["hamid", "--dim", "2", "--time", "1", "--true-h", &true_h, "--shots", "1000"]),
        ("slc", vec!["slc", "--config", &slc]),
        ("smc-demo", vec!["smc-demo", "--p0", "0.05", "--eps", "1", "--tau", "0.2", "--periods", "500"]),
        ("sweep", vec!["sweep", "--config", &sweep, "--trials", "4"]),
        ("sweep-json", vec!["sweep", "--config", &sweep, "--trials", "4", "--format", "json"]),
        ("compare-tomo", vec!["compare", "--config", &tomo_cmp, "--trials", "4"]),
        ("compare-control", vec!["compare", "--config", &ctrl_cmp, "--trials", "2"]),
    ];
    let mut failures = Vec::new();
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("{name}-{rep}"));
            let out_s = out.to_string_lossy().into_owned();
            let mut full = args.clone();
            full.extend(["--seed", "42", "--out", &out_s]);
            let (code, _) = qest(&full);
            let (code_stdout, stdout) = qest(&[args.as_slice(), &["--seed", "42"]].concat());
            let files =
                if out.is_dir() { dir_bytes(&out) } else { vec![(String::new(), fs::read(&out).unwrap_or_default())] };
            outputs.push((code, code_stdout, stdout, files));
        }
        let (a, b) = (&outputs[0], &outputs[1]);
        if a.0 != 0 || a.1 != 0 || a != b || a.3.iter().any(|f| f.1.is_empty()) {
            failures.push(name.to_string());
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} command runs repeated with seed 42, files and stdout byte-identical{}",
            runs.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; differing or failing: {}", failures.join(", "))
            }
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = Vec::new();
    for (n, run) in criteria {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {n}: {} [{secs:.1}s] {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria passed");
    } else {
        println!("acceptance: {} of 11 criteria failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
