//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line (written straight to stderr so it shows even when the
//! harness captures output).

use std::io::Write;
use std::path::Path;
use std::process::Command;

use gradedchain::bethe::{
    bethe_residual, calibrate_termination, eigenvalue_recursion, energy_with, one_magnon_roots, one_magnon_vector,
    solve_bethe, BetheConfig, BetheForm, EnergyFit, EnergyFormula, SolverOptions, Termination,
};
use gradedchain::chain::{
    hamiltonian_closed, hamiltonian_density_closed, hamiltonian_density_fd, rtt_residual, transfer,
    transfer_commutator, ChainSpec,
};
use gradedchain::graded_space::label_permutation_operator;
use gradedchain::rmatrix::{check_ybe, regularity_residual};
use gradedchain::spectra::{
    dense_spectrum, eigensystem, joint_eigenspace, match_aba_to_ed, restricted_eigenvalues, transfer_grid,
    DegeneracyTolerance,
};
use gradedchain::{Complex64, LiftConvention, ModelSpec, StateIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(id: &str, passed: bool, detail: String) {
    let line = format!("{} {id}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "{id}: {detail}");
}

fn model(m: usize, n: usize, mult: &[usize], q: Complex64, lift: LiftConvention) -> ModelSpec {
    ModelSpec::new(m, n, mult.to_vec(), q, lift).unwrap()
}

const YBE_SPECS: [(usize, usize, &[usize]); 4] =
    [(2, 0, &[1, 1]), (1, 1, &[1, 1]), (1, 1, &[2, 1]), (2, 1, &[2, 1, 3])];

fn random_q(rng: &mut ChaCha8Rng) -> Complex64 {
    loop {
        let q = Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(-1.2..1.2));
        if (q * q - 1.0).norm() > 0.2 {
            return q;
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    cx(rng.random_range(-r..r), rng.random_range(-r..r))
}

/// 100 draws of (u, v, w, q) whose spectral differences stay clear of the
/// weight pole e^{2x} = q².
fn ybe_draws(seed: u64) -> Vec<[Complex64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < 100 {
        let q = random_q(&mut rng);
        let (u, v, w) = (random_point(&mut rng, 0.5), random_point(&mut rng, 0.5), random_point(&mut rng, 0.5));
        let clear = [u - v, u - w, v - w].iter().all(|&x| ((x * 2.0).exp() - q * q).norm() > 0.1);
        if clear {
            out.push([u, v, w, q]);
        }
    }
    out
}

fn worst_ybe(lift: LiftConvention) -> (f64, String) {
    let mut worst = 0.0f64;
    let mut per_spec = Vec::new();
    for (k, (m, n, mult)) in YBE_SPECS.iter().enumerate() {
        let mut spec_worst = 0.0f64;
        for [u, v, w, q] in ybe_draws(100 + k as u64) {
            let s = model(*m, *n, mult, q, lift);
            spec_worst = spec_worst.max(check_ybe(&s, u, v, w, lift).unwrap());
        }
        per_spec.push(format!("{mult:?}={spec_worst:.1e}"));
        worst = worst.max(spec_worst);
    }
    (worst, per_spec.join(" "))
}

#[test]
fn c01a_ybe_exchange_lift() {
    let (worst, detail) = worst_ybe(LiftConvention::Exchange);
    report("c01a ybe exchange lift (< 1e-12, 4 specs x 100 draws)", worst < 1e-12, detail);
}

#[test]
fn c01b_ybe_diagonal_lift() {
    let (worst, detail) = worst_ybe(LiftConvention::Diagonal);
    report("c01b ybe diagonal lift (< 1e-12, 4 specs x 100 draws)", worst < 1e-12, detail);
}

#[test]
fn c02_regularity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for (m, n, mult) in YBE_SPECS {
        for _ in 0..20 {
            let s = model(m, n, mult, random_q(&mut rng), LiftConvention::Exchange);
            worst = worst.max(regularity_residual(&s).unwrap());
        }
    }
    report("c02 regularity R(0) = P (<= 1e-14)", worst <= 1e-14, format!("max {worst:.1e}"));
}

#[test]
fn c03_rtt_and_commutativity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let specs: [(usize, usize, &[usize]); 6] =
        [(2, 0, &[1, 1]), (1, 1, &[1, 1]), (1, 1, &[2, 1]), (2, 1, &[1, 1, 1]), (1, 1, &[2, 2]), (2, 1, &[2, 1, 1])];
    let (mut rtt, mut comm) = (0.0f64, 0.0f64);
    for (m, n, mult) in specs {
        let q = random_q(&mut rng);
        for p0 in 1..=4 {
            let inh: Vec<Complex64> = (0..p0).map(|_| random_point(&mut rng, 0.2)).collect();
            let chain = ChainSpec::new(model(m, n, mult, q, LiftConvention::Exchange), inh).unwrap();
            let (lam, mu, nu) = (random_point(&mut rng, 0.4), random_point(&mut rng, 0.4), random_point(&mut rng, 0.4));
            if p0 <= 3 {
                rtt = rtt.max(rtt_residual(&chain, lam, mu).unwrap());
            }
            comm = comm.max(transfer_commutator(&chain, mu, nu).unwrap());
        }
    }
    report(
        "c03 rtt (< 1e-10, p0 <= 3, N <= 4) and [tau, tau] (< 1e-10, p0 <= 4)",
        rtt < 1e-10 && comm < 1e-10,
        format!("rtt {rtt:.1e}, commutator {comm:.1e}"),
    );
}

#[test]
fn c04_hamiltonian_density_vs_finite_difference() {
    // central differences leave h²·R‴(0)/6, and R‴(0) grows without bound
    // as q² → 1, so the draws cover the same q range as everywhere else
    let h = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut worst_q = cx(0.0, 0.0);
    let mut worst_ratio = f64::INFINITY;
    let mut within = 0;
    let mut total = 0;
    for _ in 0..8 {
        let q = random_q(&mut rng);
        for (m, n, mult) in YBE_SPECS {
            for lift in [LiftConvention::Exchange, LiftConvention::Diagonal] {
                let s = model(m, n, mult, q, lift);
                let closed = hamiltonian_density_closed(&s);
                let d1 = closed.max_abs_diff(&hamiltonian_density_fd(&s, h).unwrap()).unwrap();
                let d2 = closed.max_abs_diff(&hamiltonian_density_fd(&s, h / 2.0).unwrap()).unwrap();
                if d1 > worst {
                    (worst, worst_q) = (d1, q);
                }
                worst_ratio = worst_ratio.min(d1 / d2);
                within += usize::from(d1 <= 10.0 * h * h);
                total += 1;
            }
        }
    }
    report(
        "c04 closed-form H density vs FD (<= 10 h^2 at h = 1e-4, >= 3.5x on halving)",
        worst <= 10.0 * h * h && worst_ratio >= 3.5,
        format!(
            "{within}/{total} within 10 h^2; max diff {worst:.2e} = {:.1} h^2 at q = {worst_q:.3}; min reduction {worst_ratio:.2}x",
            worst / (h * h)
        ),
    );
}

#[test]
fn c05_pseudo_vacuum_exactness() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let specs: [(usize, usize, &[usize]); 7] = [
        (2, 0, &[1, 1]),
        (2, 0, &[2, 1]),
        (3, 0, &[1, 2, 1]),
        (1, 1, &[1, 1]),
        (1, 1, &[2, 1]),
        (2, 1, &[2, 1, 3]),
        (0, 2, &[1, 2]),
    ];
    let mut worst = 0.0f64;
    for (m, n, mult) in specs {
        let s = model(m, n, mult, random_q(&mut rng), LiftConvention::Exchange);
        let inh: Vec<Complex64> = (0..3).map(|_| random_point(&mut rng, 0.2)).collect();
        let chain = ChainSpec::new(s.clone(), inh).unwrap();
        let cfg = BetheConfig::vacuum(chain.clone(), calibrate_termination(&s).unwrap()).unwrap();
        let omega = chain.uniform_state(StateIndex::new(0, 0)).unwrap();
        for _ in 0..5 {
            let mu = random_point(&mut rng, 0.5);
            let lam = eigenvalue_recursion(&cfg, 0, mu).unwrap();
            let out = transfer(&chain, mu).unwrap().apply(&omega).unwrap();
            let err = out.iter().zip(&omega).map(|(a, b)| (a - lam * b).norm()).fold(0.0, f64::max);
            worst = worst.max(err / lam.norm());
        }
    }
    report(
        "c05 pseudo-vacuum eigenvalue (relative < 1e-12, 7 specs x 5 mu)",
        worst < 1e-12,
        format!("max {worst:.1e}"),
    );
}

const MU_GRID: [Complex64; 5] = [
    Complex64 { re: 0.13, im: 0.07 },
    Complex64 { re: -0.21, im: 0.3 },
    Complex64 { re: 0.4, im: -0.17 },
    Complex64 { re: 0.05, im: 0.45 },
    Complex64 { re: -0.33, im: -0.12 },
];

const MAGNON_SPECS: [(usize, usize, &[usize]); 5] =
    [(2, 0, &[1, 1]), (1, 1, &[1, 1]), (1, 1, &[2, 1]), (1, 1, &[1, 2]), (2, 1, &[1, 1, 1])];

fn relative_eigen_residual(tau: &gradedchain::SpectralOperator, v: &[Complex64], lam: Complex64) -> f64 {
    let tv = tau.apply(v).unwrap();
    let err = tv.iter().zip(v).map(|(a, b)| (a - lam * b).norm()).fold(0.0, f64::max);
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max) * lam.norm();
    err / scale
}

#[test]
fn c06_one_magnon_closed_form() {
    let q = cx(0.8, 0.25);
    let (mut res, mut vec_err, mut ed_dev) = (0.0f64, 0.0f64, 0.0f64);
    let mut roots_checked = 0;
    for (m, n, mult) in MAGNON_SPECS {
        let s = model(m, n, mult, q, LiftConvention::Exchange);
        let chain = ChainSpec::homogeneous(s.clone(), 4).unwrap();
        let t = calibrate_termination(&s).unwrap();
        let mut levels = vec![Vec::new(); m + n - 1];
        let mut solutions = Vec::new();
        for root in one_magnon_roots(&s, 4) {
            levels[0] = vec![root.lambda];
            let cfg = BetheConfig::new(chain.clone(), levels.clone(), 0, t).unwrap();
            res = res.max(bethe_residual(&cfg, 0, 0, BetheForm::for_model(&s)).unwrap().norm());
            let v = one_magnon_vector(&chain, root.lambda, StateIndex::new(1, 0), 0).unwrap();
            for &mu in &MU_GRID[..3] {
                let tau = transfer(&chain, mu).unwrap();
                vec_err = vec_err.max(relative_eigen_residual(&tau, &v, eigenvalue_recursion(&cfg, 0, mu).unwrap()));
            }
            solutions.push(cfg);
            roots_checked += 1;
        }
        let rep = match_aba_to_ed(&chain, &solutions, &MU_GRID, DegeneracyTolerance::default()).unwrap();
        for mtch in rep.matched_aba.unwrap() {
            ed_dev = ed_dev.max(mtch.max_relative_deviation);
        }
    }
    report(
        "c06 one-magnon roots (residual < 1e-12), vector eigen (< 1e-8), ED match (< 1e-8)",
        res < 1e-12 && vec_err < 1e-8 && ed_dev < 1e-8 && roots_checked > 0,
        format!("{roots_checked} roots; residual {res:.1e}, vector {vec_err:.1e}, ED {ed_dev:.1e}"),
    );
}

/// Distinct two-magnon (level-1) Newton solutions from deterministic seeds.
fn two_magnon_solutions(s: &ModelSpec, p0: usize, seeds: usize) -> Vec<BetheConfig> {
    let chain = ChainSpec::homogeneous(s.clone(), p0).unwrap();
    let t = calibrate_termination(s).unwrap();
    let depth = s.base_count() - 1;
    let branches = if depth == 1 && s.multiplicities()[1] > 1 { 2 } else { 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut found: Vec<BetheConfig> = Vec::new();
    for _ in 0..seeds {
        let seed_pair = vec![random_point(&mut rng, 0.8), random_point(&mut rng, 0.8)];
        for branch in 0..branches {
            let mut levels = vec![Vec::new(); depth];
            levels[0] = seed_pair.clone();
            let Ok(seed) = BetheConfig::new(chain.clone(), levels, branch, t) else { continue };
            let Ok(sol) = solve_bethe(&seed, &SolverOptions::default()) else { continue };
            let key = |c: &BetheConfig| eigenvalue_recursion(c, 0, MU_GRID[0]);
            let Ok(k) = key(&sol.config) else { continue };
            if found.iter().all(|f| key(f).map(|v| (v - k).norm() > 1e-8 * k.norm()).unwrap_or(true)) {
                found.push(sol.config);
            }
        }
    }
    found
}

#[test]
fn c07_two_magnon_matches_ed() {
    let q = cx(0.8, 0.25);
    let mut lines = Vec::new();
    let mut ok = true;
    for (m, n, mult) in &MAGNON_SPECS[..4] {
        let s = model(*m, *n, mult, q, LiftConvention::Exchange);
        let chain = ChainSpec::homogeneous(s.clone(), 4).unwrap();
        let sols = two_magnon_solutions(&s, 4, 24);
        let rep = match_aba_to_ed(&chain, &sols, &MU_GRID, DegeneracyTolerance::default()).unwrap();
        let matches = rep.matched_aba.unwrap();
        let worst = matches.iter().map(|m| m.max_relative_deviation).fold(0.0, f64::max);
        // off-shell control: move one rapidity by 1e-2
        let perturbed: Vec<BetheConfig> = sols
            .iter()
            .map(|c| {
                let mut r = c.rapidities().to_vec();
                r[0][0] += cx(1e-2, 0.0);
                c.with_rapidities(r).unwrap()
            })
            .collect();
        let ctrl = match_aba_to_ed(&chain, &perturbed, &MU_GRID, DegeneracyTolerance::default()).unwrap();
        let ctrl_hits = ctrl.matched_aba.unwrap().iter().filter(|m| m.matched).count();
        ok &= !sols.is_empty() && worst < 1e-8 && ctrl_hits == 0;
        lines.push(format!("{mult:?}: {} solutions, max dev {worst:.1e}, off-shell matches {ctrl_hits}", sols.len()));
    }
    report("c07 two-magnon Newton solutions vs ED on p0 = 4 (< 1e-8; off-shell control fails)", ok, lines.join("; "));
}

/// ED energy of a Bethe state: eigenvalues of H restricted to the joint τ
/// eigenspace selected by Λ⁰ on the grid.
fn ed_energies(chain: &ChainSpec, cfg: &BetheConfig, h: &gradedchain::SpectralOperator) -> Vec<Complex64> {
    let taus = transfer_grid(chain, &MU_GRID).unwrap();
    let first = eigensystem(&taus[0]).unwrap();
    let targets: Vec<Complex64> = MU_GRID.iter().map(|&mu| eigenvalue_recursion(cfg, 0, mu).unwrap()).collect();
    let joint = joint_eigenspace(&first, &taus, &targets).unwrap();
    restricted_eigenvalues(h, &joint.basis).unwrap()
}

/// Fits (scale, shift) on the vacuum and the first one-magnon state, then
/// returns the worst deviation over every other state.
fn energy_check(s: &ModelSpec, formula: EnergyFormula) -> (f64, usize, EnergyFit) {
    let p0 = 4;
    let chain = ChainSpec::homogeneous(s.clone(), p0).unwrap();
    let t = calibrate_termination(s).unwrap();
    let h = hamiltonian_closed(&chain).unwrap();
    let depth = s.base_count() - 1;
    let mut states = vec![BetheConfig::vacuum(chain.clone(), t).unwrap()];
    for root in one_magnon_roots(s, p0) {
        let mut levels = vec![Vec::new(); depth];
        levels[0] = vec![root.lambda];
        states.push(BetheConfig::new(chain.clone(), levels, 0, t).unwrap());
    }
    states.extend(two_magnon_solutions(s, p0, 16));
    let pairs: Vec<(Complex64, Vec<Complex64>)> = states
        .iter()
        .filter_map(|c| Some((energy_with(c, formula).ok()?, ed_energies(&chain, c, &h))))
        .filter(|(_, ed)| !ed.is_empty())
        .collect();
    let fit = EnergyFit::fit([pairs[0].0, pairs[1].0], [pairs[0].1[0], pairs[1].1[0]]).unwrap();
    let mut worst = 0.0f64;
    for (e, ed) in &pairs[2..] {
        for x in ed {
            worst = worst.max((fit.apply(*e) - x).norm());
        }
    }
    (worst, pairs.len() - 2, fit)
}

#[test]
fn c08a_energy_bosonic_level1() {
    let q = cx(0.55, 0.0);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut fits = Vec::new();
    for (m, n, mult) in [(2, 0, vec![1, 1]), (2, 0, vec![1, 2]), (2, 1, vec![1, 1, 1])] {
        let s = model(m, n, &mult, q, LiftConvention::Exchange);
        let (w, c, fit) = energy_check(&s, EnergyFormula::for_model(&s));
        worst = worst.max(w);
        checked += c;
        fits.push(format!("scale {:.6} shift {:.6}", fit.scale.re, fit.shift.re));
    }
    report(
        "c08a bosonic level-1 energy vs ED after one fit (< 1e-8)",
        worst < 1e-8 && checked > 0,
        format!("{checked} states, max dev {worst:.1e}; fits [{}]", fits.join(", ")),
    );
}

#[test]
fn c08b_energy_fermionic_level1() {
    let s = model(1, 1, &[1, 1], cx(0.55, 0.0), LiftConvention::Exchange);
    let (worst, checked, fit) = energy_check(&s, EnergyFormula::Fermionic);
    report(
        "c08b fermionic level-1 energy vs ED after one fit (< 1e-8)",
        worst < 1e-8 && checked > 0,
        format!("{checked} states, max dev {worst:.2e}; fit scale {:.6} shift {:.6}", fit.scale, fit.shift),
    );
}

#[test]
fn c09_multiplicity_degeneracy() {
    let q = cx(0.55, 0.0);
    let mut missing = 0.0f64;
    let mut comm = 0.0f64;
    for (m, n, mult, p0) in [
        (1, 1, vec![2, 1], 3),
        (1, 1, vec![1, 2], 3),
        (2, 0, vec![2, 1], 3),
        (2, 1, vec![2, 1, 1], 2),
        (1, 1, vec![2, 2], 3),
    ] {
        let lifted = model(m, n, &mult, q, LiftConvention::Exchange);
        let base_chain = ChainSpec::homogeneous(lifted.base_model(), p0).unwrap();
        let chain = ChainSpec::homogeneous(lifted.clone(), p0).unwrap();
        let h = hamiltonian_closed(&chain).unwrap();
        let eb = dense_spectrum(&hamiltonian_closed(&base_chain).unwrap()).unwrap();
        let el = dense_spectrum(&h).unwrap();
        for e in eb {
            missing = missing.max(el.iter().map(|x| (x - e).norm()).fold(f64::INFINITY, f64::min));
        }
        let tau = transfer(&chain, cx(0.3, 0.1)).unwrap();
        for (base, &nb) in mult.iter().enumerate() {
            for a in 0..nb {
                for b in a + 1..nb {
                    let swap = label_permutation_operator(&lifted, p0, base, a, b).unwrap();
                    comm = comm.max(swap.commutator(&tau).unwrap().max_abs());
                    comm = comm.max(swap.commutator(&h).unwrap().max_abs());
                }
            }
        }
    }
    report(
        "c09 base H spectrum inside multiplicity spectrum (< 1e-9), label swaps commute (< 1e-10)",
        missing < 1e-9 && comm < 1e-10,
        format!("max distance {missing:.1e}, max commutator {comm:.1e}"),
    );
}

fn cli_payload(dir: &Path, args: &[&str], body: &str, tag: &str) -> Vec<u8> {
    let cfg = dir.join(format!("{tag}.toml"));
    std::fs::write(&cfg, body).unwrap();
    let out = dir.join(format!("{tag}.json"));
    let status = Command::new(env!("CARGO_BIN_EXE_gradedchain"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::read(out).unwrap()
}

#[test]
fn c10_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let base = "[model]\nm = 1\nn = 1\nmultiplicities = [2, 1]\nq_re = 0.8\nq_im = 0.25\n\n[chain]\np0 = 3\n";
    let runs: [(&[&str], String); 4] = [
        (&["check"], base.to_string()),
        (&["spectrum"], format!("{base}\n[spectrum]\noperator = \"hamiltonian\"\n")),
        (&["spectrum"], format!("{base}\n[spectrum]\noperator = \"transfer\"\nmu = [0.3, -0.1]\n")),
        (&["bethe", "--seed-grid", "5"], format!("{base}\n[bethe]\nmagnon_counts = [2]\n")),
    ];
    let mut identical = 0;
    for (k, (args, body)) in runs.iter().enumerate() {
        let a = cli_payload(dir.path(), args, body, &format!("a{k}"));
        let b = cli_payload(dir.path(), args, body, &format!("b{k}"));
        if a == b {
            identical += 1;
        }
    }
    report(
        "c10 repeated CLI runs give byte-identical JSON",
        identical == runs.len(),
        format!("{identical}/{} commands identical", runs.len()),
    );
}

#[test]
fn fermionic_single_magnon_seed_still_solves() {
    // guard for the criterion-8b analysis: the Bethe states themselves are
    // fine, only the closed energy formula disagrees
    let s = model(1, 1, &[1, 1], cx(0.55, 0.0), LiftConvention::Exchange);
    let chain = ChainSpec::homogeneous(s.clone(), 4).unwrap();
    let root = one_magnon_roots(&s, 4)[1];
    let cfg = BetheConfig::new(chain.clone(), vec![vec![root.lambda]], 0, Termination::analytic(&s)).unwrap();
    let rep = match_aba_to_ed(&chain, &[cfg], &MU_GRID, DegeneracyTolerance::default()).unwrap();
    assert!(rep.matched_aba.unwrap()[0].matched);
}
