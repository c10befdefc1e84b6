//! The three subcommands. Each returns a JSON document plus whether every
//! check it ran passed.

use gradedchain::bethe::{
    calibrate_termination, eigenvalue_recursion, energy, forms_disagree, nesting_depth, solve_bethe, BetheConfig,
    BetheForm, SolverOptions,
};
use gradedchain::chain::{hamiltonian_closed, rtt_residual, transfer, transfer_commutator, ChainSpec};
use gradedchain::rmatrix::{build_r_lifted, check_form_constraint, check_ybe_with, regularity_residual};
use gradedchain::spectra::{degeneracy_histogram, dense_spectrum, match_aba_to_ed, DegeneracyTolerance};
use gradedchain::{Complex64, Error, LiftConvention, ModelSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{complex, OperatorKind, RunConfig};
use crate::json as jw;
use crate::CliError;

pub struct Outcome {
    pub document: Value,
    pub success: bool,
    pub summary: Vec<String>,
}

const fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn model_json(model: &ModelSpec) -> Value {
    json!({
        "m": model.m(),
        "n": model.n(),
        "multiplicities": model.multiplicities(),
        "q": jw::complex(model.q()),
        "lift_convention": match model.lift_convention() {
            LiftConvention::Exchange => "exchange",
            LiftConvention::Diagonal => "diagonal",
        },
    })
}

fn chain_json(chain: &ChainSpec) -> Value {
    json!({
        "p0": chain.p0(),
        "inhomogeneities": chain.inhomogeneities().iter().map(|&z| jw::complex(z)).collect::<Vec<_>>(),
    })
}

pub const YBE_THRESHOLD: f64 = 1e-12;
pub const REGULARITY_THRESHOLD: f64 = 1e-14;
pub const RTT_THRESHOLD: f64 = 1e-10;
pub const COMMUTATIVITY_THRESHOLD: f64 = 1e-10;

const YBE_POINTS: [[Complex64; 3]; 3] = [
    [cx(0.31, 0.12), cx(-0.17, 0.05), cx(0.22, -0.31)],
    [cx(0.7, 0.2), cx(0.1, -0.4), cx(-0.3, 0.1)],
    [cx(1.1, 0.0), cx(0.4, 0.0), cx(-0.2, 0.0)],
];

struct Check {
    name: &'static str,
    residual: f64,
    threshold: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.residual < self.threshold
    }
}

/// Yang-Baxter, form constraint, regularity, RTT and commutativity. With
/// `corrupt_r` one entry of R is perturbed, which must make the YBE fail.
pub fn check(cfg: &RunConfig, tol: Option<f64>, corrupt_r: bool) -> Result<Outcome, CliError> {
    let chain = cfg.chain_spec()?;
    let model = chain.model().clone();
    let build = |x: Complex64| {
        let mut r = build_r_lifted(&model, x)?;
        if corrupt_r {
            r.add_at(1, 1, cx(1e-3, 0.0));
        }
        Ok::<_, Error>(r)
    };
    let mut ybe = 0.0f64;
    for [u, v, w] in YBE_POINTS {
        ybe = ybe.max(check_ybe_with(&model, u, v, w, build)?);
    }
    let mut form_ok = true;
    for x in [cx(0.23, 0.11), cx(-0.4, 0.3)] {
        form_ok &= check_form_constraint(&build(x)?, &model);
    }
    let (lam, mu, nu) = (cx(0.27, 0.13), cx(-0.19, 0.08), cx(0.35, -0.21));
    let thr = |t: f64| tol.unwrap_or(t);
    let checks = [
        Check { name: "ybe", residual: ybe, threshold: thr(YBE_THRESHOLD) },
        Check { name: "form_constraint", residual: if form_ok { 0.0 } else { 1.0 }, threshold: 0.5 },
        Check { name: "regularity", residual: regularity_residual(&model)?, threshold: thr(REGULARITY_THRESHOLD) },
        Check { name: "rtt", residual: rtt_residual(&chain, lam, mu)?, threshold: thr(RTT_THRESHOLD) },
        Check {
            name: "commutativity",
            residual: transfer_commutator(&chain, mu, nu)?,
            threshold: thr(COMMUTATIVITY_THRESHOLD),
        },
    ];
    let success = checks.iter().all(Check::passed);
    let summary = checks
        .iter()
        .map(|c| {
            format!(
                "{:<16} residual {:>10.3e}  threshold {:>8.1e}  {}",
                c.name,
                c.residual,
                c.threshold,
                if c.passed() { "PASS" } else { "FAIL" }
            )
        })
        .collect();
    let document = json!({
        "model": model_json(&model),
        "chain": chain_json(&chain),
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "residual": c.residual,
            "threshold": c.threshold,
            "passed": c.passed(),
        })).collect::<Vec<_>>(),
        "passed": success,
    });
    Ok(Outcome { document, success, summary })
}

/// Dense spectrum of H or τ(μ) with its degeneracy classes.
pub fn spectrum(cfg: &RunConfig, tol: Option<f64>) -> Result<Outcome, CliError> {
    let section = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("the spectrum command needs a [spectrum] section".into()))?;
    let chain = cfg.chain_spec()?;
    let (op, mu) = match section.operator {
        OperatorKind::Hamiltonian => {
            if section.mu.is_some() {
                return Err(CliError::Config("spectrum.mu only applies to operator = \"transfer\"".into()));
            }
            (hamiltonian_closed(&chain)?, None)
        }
        OperatorKind::Transfer => {
            let mu = complex(
                section.mu.ok_or_else(|| CliError::Config("operator = \"transfer\" needs spectrum.mu".into()))?,
            );
            (transfer(&chain, mu)?, Some(mu))
        }
    };
    let deg_tol = tol.or(section.degeneracy_tol).map(DegeneracyTolerance::uniform).unwrap_or_default();
    if deg_tol.abs <= 0.0 && deg_tol.rel <= 0.0 {
        return Err(CliError::Config("degeneracy tolerance must be positive".into()));
    }
    let eigs = dense_spectrum(&op)?;
    let classes = degeneracy_histogram(&eigs, deg_tol);
    let mut document = json!({
        "model": model_json(chain.model()),
        "chain": chain_json(&chain),
        "operator": match section.operator {
            OperatorKind::Hamiltonian => "hamiltonian",
            OperatorKind::Transfer => "transfer",
        },
        "eigenvalues": eigs.iter().map(|&z| jw::complex(z)).collect::<Vec<_>>(),
        "degeneracies": classes.iter().map(|c| json!({
            "re": c.value.re,
            "im": c.value.im,
            "count": c.count,
        })).collect::<Vec<_>>(),
    });
    if let Some(mu) = mu {
        document["mu"] = jw::complex(mu);
    }
    let summary = vec![format!("{} eigenvalues in {} degeneracy classes", eigs.len(), classes.len())];
    Ok(Outcome { document, success: true, summary })
}

pub const DEFAULT_MU_GRID: [[f64; 2]; 5] = [[0.13, 0.07], [-0.21, 0.3], [0.4, -0.17], [0.05, 0.45], [-0.33, -0.12]];

/// `count` quasi-random seeds (additive recurrence) filling the strip
/// Re λ ∈ [−1, 1], Im λ ∈ (−π/2, π/2).
pub fn auto_seeds(counts: &[usize], count: usize) -> Vec<Vec<Vec<Complex64>>> {
    const A1: f64 = 0.754_877_666_246_692_7;
    const A2: f64 = 0.569_840_290_998_053_2;
    let per_seed: usize = counts.iter().sum();
    let half = std::f64::consts::FRAC_PI_2 - 0.05;
    (0..count)
        .map(|s| {
            let mut t = s * per_seed;
            counts
                .iter()
                .map(|&p| {
                    (0..p)
                        .map(|_| {
                            t += 1;
                            let u = (0.5 + t as f64 * A1).fract();
                            let v = (0.5 + t as f64 * A2).fract();
                            cx(2.0 * u - 1.0, (2.0 * v - 1.0) * half)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn failure_reason(e: &Error) -> String {
    match e {
        Error::Collision { .. } => "collision".into(),
        Error::NoConvergence { .. } => "no_convergence".into(),
        Error::SingularJacobian { .. } => "singular_jacobian".into(),
        other => other.to_string(),
    }
}

fn levels_json(levels: &[Vec<Complex64>]) -> Value {
    Value::Array(levels.iter().map(|l| Value::Array(l.iter().map(|&z| jw::complex(z)).collect())).collect())
}

/// Newton solves from explicit and auto-generated seeds, Λ⁰ samples, energy
/// and ED matching of every converged solution.
pub fn bethe(cfg: &RunConfig, tol: Option<f64>, seed_grid: Option<usize>) -> Result<Outcome, CliError> {
    let section =
        cfg.bethe.as_ref().ok_or_else(|| CliError::Config("the bethe command needs a [bethe] section".into()))?;
    let chain = cfg.chain_spec()?;
    let model = chain.model().clone();
    let depth = nesting_depth(&model);
    if section.magnon_counts.len() != depth {
        return Err(CliError::Config(format!(
            "bethe.magnon_counts needs {depth} entries (one per nested level), got {}",
            section.magnon_counts.len()
        )));
    }
    let counts = section.magnon_counts.clone();
    let vacuum_only = counts.iter().all(|&p| p == 0);
    let mut seeds: Vec<Vec<Vec<Complex64>>> = Vec::new();
    if !section.seeds.is_empty() {
        let shape: Vec<usize> = section.seeds.iter().map(Vec::len).collect();
        if shape != counts {
            return Err(CliError::Config(format!(
                "bethe.seeds has per-level lengths {shape:?}, expected magnon_counts {counts:?}"
            )));
        }
        seeds.push(section.seeds.iter().map(|l| l.iter().copied().map(complex).collect()).collect());
    }
    if vacuum_only {
        seeds = vec![vec![Vec::new(); depth]];
    } else {
        if let Some(k) = seed_grid {
            seeds.extend(auto_seeds(&counts, k * k));
        }
        if seeds.is_empty() {
            return Err(CliError::Config("no Bethe seeds; give bethe.seeds or --seed-grid".into()));
        }
    }
    let newton_tol = tol.unwrap_or(section.tol);
    if !(newton_tol > 0.0) {
        return Err(CliError::Config("Newton tolerance must be positive".into()));
    }
    let mu_grid: Vec<Complex64> = if section.mu_grid.is_empty() {
        DEFAULT_MU_GRID.iter().copied().map(complex).collect()
    } else {
        section.mu_grid.iter().copied().map(complex).collect()
    };

    let termination = calibrate_termination(&model)?;
    let make = |levels: Vec<Vec<Complex64>>| -> Result<BetheConfig, Error> {
        let c = BetheConfig::new(chain.clone(), levels, section.final_branch, termination)?;
        match &section.pseudo_vacuum_labels {
            Some(labels) => c.with_pseudo_vacuum_labels(labels.clone()),
            None => Ok(c),
        }
    };
    // configuration problems surface once, before any solve
    let template = make(seeds[0].clone())?;
    let opts = SolverOptions { max_iter: section.max_iter, tol: newton_tol, ..SolverOptions::default() };
    let solved: Vec<Result<(BetheConfig, usize, f64), Error>> = seeds
        .par_iter()
        .map(|levels| {
            let seed = make(levels.clone())?;
            if vacuum_only {
                return Ok((seed, 0, 0.0));
            }
            solve_bethe(&seed, &opts).map(|s| (s.config, s.report.iterations, s.report.residual))
        })
        .collect();

    let converged: Vec<BetheConfig> = solved.iter().filter_map(|r| r.as_ref().ok().map(|s| s.0.clone())).collect();
    let report = match_aba_to_ed(&chain, &converged, &mu_grid, DegeneracyTolerance::default())?;
    let matches = report.matched_aba.unwrap_or_default();

    let mut solutions = Vec::new();
    let mut converged_idx = 0;
    for (id, (seed, result)) in seeds.iter().zip(&solved).enumerate() {
        let mut entry = json!({ "id": id, "seed": levels_json(seed) });
        match result {
            Err(e) => {
                entry["converged"] = json!(false);
                entry["failure"] = json!(failure_reason(e));
                entry["message"] = json!(e.to_string());
            }
            Ok((sol, iterations, residual)) => {
                let m = &matches[converged_idx];
                converged_idx += 1;
                let samples: Vec<Value> = mu_grid
                    .iter()
                    .map(|&mu| {
                        let value = eigenvalue_recursion(sol, 0, mu).map(jw::complex).unwrap_or(Value::Null);
                        json!({ "mu": jw::complex(mu), "value": value })
                    })
                    .collect();
                entry["converged"] = json!(true);
                entry["rapidities"] = levels_json(sol.rapidities());
                entry["iterations"] = json!(iterations);
                entry["residual"] = json!(residual);
                entry["lambda0"] = Value::Array(samples);
                match energy(sol) {
                    Ok(e) => entry["energy"] = jw::complex(e),
                    Err(e) => {
                        entry["energy"] = Value::Null;
                        entry["energy_error"] = json!(e.to_string());
                    }
                }
                entry["ed_match"] = if m.matched { json!(m.eigenvalue_index) } else { Value::Null };
                entry["ed_max_relative_deviation"] = json!(m.max_relative_deviation);
            }
        }
        solutions.push(entry);
    }
    let n_ok = converged.len();
    let n_matched = matches.iter().filter(|m| m.matched).count();
    let form = BetheForm::for_model(&model);
    let document = json!({
        "model": model_json(&model),
        "chain": chain_json(&chain),
        "magnon_counts": counts,
        "final_branch": section.final_branch,
        "pseudo_vacuum_labels": template.pseudo_vacuum_labels(),
        "bethe_form": match form { BetheForm::Graded => "graded", BetheForm::Bosonic => "bosonic" },
        "forms_disagree_at_levels": (0..depth).filter(|&k| forms_disagree(&model, k)).collect::<Vec<_>>(),
        "termination": {
            "value": jw::complex(termination.value),
            "analytic": jw::complex(termination.analytic),
            "deviation": termination.deviation(),
        },
        "mu_grid": mu_grid.iter().map(|&z| jw::complex(z)).collect::<Vec<_>>(),
        "warnings": template.warnings(),
        "solutions": solutions,
    });
    let summary =
        vec![format!("{} seeds, {n_ok} converged, {n_matched} matched to exact diagonalization", seeds.len())];
    Ok(Outcome { document, success: n_ok > 0, summary })
}
