//! Nested algebraic Bethe ansatz: the level-by-level eigenvalue recursion,
//! Bethe equations and their Newton solver, energies, and explicit
//! one-magnon states.
//!
//! Level 0 carries the chain inhomogeneities; level k ≥ 1 carries the
//! rapidities λ^k_y; there are K = m + n − 1 nested levels and level k uses
//! base index k (grade |k|).

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;

use crate::chain::{monodromy_entry, transfer, ChainSpec};
use crate::error::{Error, Result};
use crate::graded_space::{LiftConvention, ModelSpec, StateIndex};
use crate::rmatrix::BoltzmannWeights;
use crate::spectra::dense_spectrum;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Below this |1 − e^{2z}| the weight b(z) is treated as zero.
const B_ZERO_TOLERANCE: f64 = 1e-12;

/// Number of nested levels, K = m + n − 1.
pub fn nesting_depth(model: &ModelSpec) -> usize {
    model.base_count() - 1
}

/// Value of the final-level eigenvalue for an empty final level, together
/// with the supertrace-of-identity value (−1)^{|K|} n_K it should equal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Termination {
    pub value: Complex64,
    pub analytic: Complex64,
    pub calibrated: bool,
}

impl Termination {
    fn analytic_value(model: &ModelSpec) -> Complex64 {
        let k = nesting_depth(model);
        let nk = model.multiplicities()[k] as f64;
        Complex64::new(if model.base_grade(k) == 1 { -nk } else { nk }, 0.0)
    }

    /// The constant taken straight from the trace of the identity.
    pub fn analytic(model: &ModelSpec) -> Self {
        let v = Self::analytic_value(model);
        Self { value: v, analytic: v, calibrated: false }
    }

    pub fn deviation(&self) -> f64 {
        (self.value - self.analytic).norm()
    }
}

/// Fixes the empty-final-level constant by matching the vacuum eigenvalue of
/// a single-site chain against exact diagonalization. The recursion is
/// affine in the constant, so one ED eigenvalue determines it.
pub fn calibrate_termination(model: &ModelSpec) -> Result<Termination> {
    let analytic = Termination::analytic_value(model);
    let chain = ChainSpec::homogeneous(model.clone(), 1)?;
    let mu = Complex64::new(0.317, 0.229);
    let tau = transfer(&chain, mu)?;
    let guess = tau.get(0, 0);
    let ed = dense_spectrum(&tau)?
        .into_iter()
        .min_by(|a, b| (a - guess).norm().total_cmp(&(b - guess).norm()))
        .ok_or(Error::Eigensolver)?;
    let empty = vec![Vec::new(); nesting_depth(model)];
    let with = |value: Complex64| -> Result<Complex64> {
        let t = Termination { value, analytic, calibrated: false };
        let cfg = BetheConfig::new(chain.clone(), empty.clone(), 0, t)?;
        eigenvalue_recursion(&cfg, 0, mu)
    };
    let alpha = with(ZERO)?;
    let beta = with(ONE)? - alpha;
    if beta.norm() < 1e-14 {
        return Err(Error::Domain("vacuum eigenvalue does not depend on the termination constant".into()));
    }
    Ok(Termination { value: (ed - alpha) / beta, analytic, calibrated: true })
}

/// Rapidities of all nested levels plus the final root-of-unity branch.
#[derive(Clone, Debug, PartialEq)]
pub struct BetheConfig {
    chain: ChainSpec,
    rapidities: Vec<Vec<Complex64>>,
    final_branch: usize,
    pseudo_vacuum_labels: Vec<usize>,
    termination: Termination,
    warnings: Vec<String>,
}

impl BetheConfig {
    /// `rapidities[k-1]` holds λ^k_y for k = 1..=K.
    pub fn new(
        chain: ChainSpec,
        rapidities: Vec<Vec<Complex64>>,
        final_branch: usize,
        termination: Termination,
    ) -> Result<Self> {
        let model = chain.model();
        let depth = nesting_depth(model);
        if rapidities.len() != depth {
            return Err(Error::InvalidConfig(format!(
                "expected rapidities for {depth} nested levels, got {}",
                rapidities.len()
            )));
        }
        if model.lift_convention() == LiftConvention::Diagonal && model.has_multiplicity() {
            return Err(Error::UnsupportedConvention);
        }
        if rapidities.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidConfig("rapidities must be finite".into()));
        }
        let p_final = rapidities[depth - 1].len();
        if final_branch >= p_final.max(1) {
            return Err(Error::InvalidConfig(format!(
                "final_branch {final_branch} needs to be below the final-level count {}",
                p_final.max(1)
            )));
        }
        if final_branch != 0 && model.multiplicities()[depth] == 1 {
            return Err(Error::InvalidConfig(
                "the final level has one-dimensional sites, where the shift operator is the identity; only final_branch = 0 is admissible"
                    .into(),
            ));
        }
        let mut warnings = Vec::new();
        let mut previous = chain.p0();
        for (k, level) in rapidities.iter().enumerate() {
            if level.len() > previous {
                warnings.push(format!(
                    "level {} has {} magnons, more than the {} of the level below",
                    k + 1,
                    level.len(),
                    previous
                ));
            }
            previous = level.len();
        }
        Ok(Self { pseudo_vacuum_labels: vec![0; depth], chain, rapidities, final_branch, termination, warnings })
    }

    /// Vacuum: no magnons at any level.
    pub fn vacuum(chain: ChainSpec, termination: Termination) -> Result<Self> {
        let depth = nesting_depth(chain.model());
        Self::new(chain, vec![Vec::new(); depth], 0, termination)
    }

    pub fn with_pseudo_vacuum_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        let mult = self.chain.model().multiplicities();
        if labels.len() != self.rapidities.len() || labels.iter().enumerate().any(|(k, &a)| a >= mult[k]) {
            return Err(Error::InvalidConfig(format!("invalid pseudo-vacuum labels {labels:?}")));
        }
        self.pseudo_vacuum_labels = labels;
        Ok(self)
    }

    /// Same configuration with replaced rapidities (same counts).
    pub fn with_rapidities(&self, rapidities: Vec<Vec<Complex64>>) -> Result<Self> {
        let cfg = Self::new(self.chain.clone(), rapidities, self.final_branch, self.termination)?;
        cfg.with_pseudo_vacuum_labels(self.pseudo_vacuum_labels.clone())
    }

    pub fn chain(&self) -> &ChainSpec {
        &self.chain
    }

    pub fn model(&self) -> &ModelSpec {
        self.chain.model()
    }

    pub fn depth(&self) -> usize {
        self.rapidities.len()
    }

    /// All rapidities, levels 1..=K.
    pub fn rapidities(&self) -> &[Vec<Complex64>] {
        &self.rapidities
    }

    /// λ^k: inhomogeneities for k = 0, rapidities after.
    pub fn level(&self, k: usize) -> &[Complex64] {
        if k == 0 {
            self.chain.inhomogeneities()
        } else {
            &self.rapidities[k - 1]
        }
    }

    /// p_k for k = 1..=K.
    pub fn magnon_counts(&self) -> Vec<usize> {
        self.rapidities.iter().map(Vec::len).collect()
    }

    pub fn final_branch(&self) -> usize {
        self.final_branch
    }

    pub fn pseudo_vacuum_labels(&self) -> &[usize] {
        &self.pseudo_vacuum_labels
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// ω = exp(2πi·final_branch/p_K), 1 for an empty final level.
    pub fn omega(&self) -> Complex64 {
        let p = self.rapidities[self.depth() - 1].len();
        if p == 0 {
            ONE
        } else {
            Complex64::from_polar(1.0, 2.0 * PI * self.final_branch as f64 / p as f64)
        }
    }
}

fn weights(model: &ModelSpec, z: Complex64) -> Result<BoltzmannWeights> {
    BoltzmannWeights::at(model, z)
}

fn b_checked(model: &ModelSpec, z: Complex64) -> Result<Complex64> {
    if (ONE - (z * 2.0).exp()).norm() < B_ZERO_TOLERANCE {
        return Err(Error::Domain(format!("b vanishes at {} + {}i", z.re, z.im)));
    }
    Ok(weights(model, z)?.b)
}

fn sign(grade: u8) -> f64 {
    if grade == 1 {
        -1.0
    } else {
        1.0
    }
}

/// The three contributions to Λ^k(μ) for k < K: multiplicity (δ-term),
/// direct (Π a_k · Π a_k/b) and nested (Π b / Π b · Λ^{k+1}).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelTerms {
    pub multiplicity: Complex64,
    pub direct: Complex64,
    pub nested: Complex64,
}

impl LevelTerms {
    pub fn total(&self) -> Complex64 {
        self.multiplicity + self.direct + self.nested
    }
}

pub fn eigenvalue_terms(cfg: &BetheConfig, k: usize, mu: Complex64) -> Result<LevelTerms> {
    let depth = cfg.depth();
    if k >= depth {
        return Err(Error::InvalidConfig(format!("level {k} has no recursion terms (K = {depth})")));
    }
    let model = cfg.model();
    let s = sign(model.base_grade(k));
    let (here, above) = (cfg.level(k), cfg.level(k + 1));
    let mut prod_b = ONE;
    let mut prod_a = ONE;
    for &l in here {
        let w = weights(model, mu - l)?;
        prod_b *= w.b;
        prod_a *= w.a[k];
    }
    let mut ratio_a_b = ONE;
    let mut inv_b = ONE;
    for &l in above {
        let w = weights(model, l - mu)?;
        ratio_a_b *= w.a[k] / b_checked(model, l - mu)?;
        inv_b /= b_checked(model, mu - l)?;
    }
    let nk = model.multiplicities()[k] as f64;
    let multiplicity = if here.len() == above.len() { prod_b * (s * (nk - 1.0)) } else { ZERO };
    let direct = prod_a * ratio_a_b * s;
    let nested = prod_b * inv_b * eigenvalue_recursion(cfg, k + 1, mu)?;
    Ok(LevelTerms { multiplicity, direct, nested })
}

/// Λ^k(μ); Λ^0 is the transfer-matrix eigenvalue.
pub fn eigenvalue_recursion(cfg: &BetheConfig, k: usize, mu: Complex64) -> Result<Complex64> {
    if k == cfg.depth() {
        final_level_eigenvalue(cfg, mu)
    } else {
        Ok(eigenvalue_terms(cfg, k, mu)?.total())
    }
}

/// Λ^K(μ) = (−1)^{|K|} ω Π_x a_K(μ − λ^K_x); the termination constant when
/// the final level is empty.
pub fn final_level_eigenvalue(cfg: &BetheConfig, mu: Complex64) -> Result<Complex64> {
    let k = cfg.depth();
    let level = cfg.level(k);
    if level.is_empty() {
        return Ok(cfg.termination.value);
    }
    let model = cfg.model();
    let mut prod = ONE;
    for &l in level {
        prod *= weights(model, mu - l)?.a[k];
    }
    Ok(prod * cfg.omega() * sign(model.base_grade(k)))
}

/// Right-hand side convention of the Bethe equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetheForm {
    /// RHS = 1.
    Graded,
    /// RHS = 1/a_{k+1}(0).
    Bosonic,
}

impl BetheForm {
    pub fn for_model(model: &ModelSpec) -> Self {
        if model.is_bosonic() {
            BetheForm::Bosonic
        } else {
            BetheForm::Graded
        }
    }
}

/// True when the two right-hand sides differ at level k, i.e. a_{k+1}(0) ≠ 1.
pub fn forms_disagree(model: &ModelSpec, k: usize) -> bool {
    model.base_grade(k + 1) == 1
}

fn same_rapidity(a: Complex64, b: Complex64, tol: f64) -> bool {
    // weights are iπ-periodic, so compare e^{2λ}
    let (xa, xb) = ((a * 2.0).exp(), (b * 2.0).exp());
    (xa - xb).norm() <= tol * xa.norm().max(xb.norm()).max(1.0)
}

/// First pair of coinciding rapidities (modulo iπ) at any nested level.
pub fn find_collision(cfg: &BetheConfig, tol: f64) -> Option<Error> {
    for k in 1..=cfg.depth() {
        let level = cfg.level(k);
        for i in 0..level.len() {
            for j in i + 1..level.len() {
                if same_rapidity(level[i], level[j], tol) {
                    return Some(Error::Collision { level: k, i, j });
                }
            }
        }
    }
    None
}

/// LHS − RHS of the level-k equation for λ^{k+1}_z:
///   Π_{y} a_{k+1}(λ^{k+2}_y − λ_z)/b(λ^{k+2}_y − λ_z)
///   · Π_{y≠z} a_{k+1}(λ_z − λ_y) b(λ_y − λ_z) / (a_k(λ_y − λ_z) b(λ_z − λ_y))
///   · Π_x b(λ_z − λ^k_x)/a_k(λ_z − λ^k_x),
/// times ω on the last level (k+1 = K).
pub fn bethe_residual(cfg: &BetheConfig, k: usize, z: usize, form: BetheForm) -> Result<Complex64> {
    let depth = cfg.depth();
    if k >= depth || z >= cfg.level(k + 1).len() {
        return Err(Error::InvalidConfig(format!("no rapidity {z} at level {}", k + 1)));
    }
    let model = cfg.model();
    let own = cfg.level(k + 1);
    for (y, &l) in own.iter().enumerate() {
        if y != z && same_rapidity(l, own[z], 1e-8) {
            return Err(Error::Collision { level: k + 1, i: z.min(y), j: z.max(y) });
        }
    }
    let lz = own[z];
    let mut lhs = ONE;
    if k + 2 <= depth {
        for &l in cfg.level(k + 2) {
            lhs *= weights(model, l - lz)?.a[k + 1] / b_checked(model, l - lz)?;
        }
    }
    for (y, &l) in own.iter().enumerate() {
        if y == z {
            continue;
        }
        let fwd = weights(model, lz - l)?;
        let bwd = weights(model, l - lz)?;
        lhs *= fwd.a[k + 1] * b_checked(model, l - lz)? / (bwd.a[k] * b_checked(model, lz - l)?);
    }
    for &l in cfg.level(k) {
        let w = weights(model, lz - l)?;
        lhs *= w.b / w.a[k];
    }
    if k + 1 == depth {
        lhs *= cfg.omega();
    }
    let rhs = match form {
        BetheForm::Graded => ONE,
        BetheForm::Bosonic => ONE / weights(model, ZERO)?.a[k + 1],
    };
    Ok(lhs - rhs)
}

/// All residuals, level by level.
pub fn residual_vector(cfg: &BetheConfig, form: BetheForm) -> Result<Vec<Complex64>> {
    let mut out = Vec::new();
    for k in 0..cfg.depth() {
        for z in 0..cfg.level(k + 1).len() {
            out.push(bethe_residual(cfg, k, z, form)?);
        }
    }
    Ok(out)
}

/// Max-norm; any non-finite entry makes it infinite.
fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| if z.re.is_finite() && z.im.is_finite() { z.norm() } else { f64::INFINITY }).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub collision_tol: f64,
    pub form: Option<BetheForm>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-10, collision_tol: 1e-8, form: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub residual: f64,
    pub termination: Termination,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BetheSolution {
    pub config: BetheConfig,
    pub report: ConvergenceReport,
}

fn unflatten_levels(template: &BetheConfig, x: &[Complex64]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(template.depth());
    let mut at = 0;
    for level in template.rapidities() {
        out.push(x[at..at + level.len()].to_vec());
        at += level.len();
    }
    out
}

/// Longest Newton step (max-norm, in λ) before halving starts.
pub const MAX_STEP: f64 = 1.0;

/// Damped Newton iteration on the stacked residuals with a central
/// finite-difference complex Jacobian. Steps longer than [`MAX_STEP`] are
/// shortened, then halved up to 8 times while the max-norm residual fails to
/// decrease.
pub fn solve_bethe(seed: &BetheConfig, opts: &SolverOptions) -> Result<BetheSolution> {
    let form = opts.form.unwrap_or_else(|| BetheForm::for_model(seed.model()));
    if let Some(e) = find_collision(seed, opts.collision_tol) {
        return Err(e);
    }
    let eval = |x: &[Complex64]| -> Result<(BetheConfig, Vec<Complex64>)> {
        let cfg = seed.with_rapidities(unflatten_levels(seed, x))?;
        let f = residual_vector(&cfg, form)?;
        Ok((cfg, f))
    };
    let mut x: Vec<Complex64> = seed.rapidities().iter().flatten().copied().collect();
    let (mut cfg, f) = eval(&x)?;
    let mut norm = max_abs(&f);
    let mut f = f;
    let mut iterations = 0;
    while norm >= opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::NoConvergence { iterations, residual: norm });
        }
        iterations += 1;
        let dx =
            newton_direction(&eval, &x, &f, norm, 1e-7)?.ok_or(Error::SingularJacobian { iteration: iterations })?;
        match damped_step(&eval, &x, &dx, norm) {
            Some(step) => (x, cfg, f, norm) = (step.x, step.cfg, step.f, step.norm),
            None => return Err(Error::NoConvergence { iterations, residual: norm }),
        }
    }
    // A pair of rapidities sliding into each other can meet the tolerance
    // while still about 1e-8 apart; a few more steps that do not raise the
    // residual leave a true root in place but push such a pair into the
    // collision window.
    for _ in 0..POLISH_STEPS {
        let Ok(Some(dx)) = newton_direction(&eval, &x, &f, 1.0, POLISH_FD_STEP) else { break };
        let longest = dx.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = x.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let trial: Vec<Complex64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let Ok((c, ft)) = eval(&trial) else { break };
        let nt = max_abs(&ft);
        if !(nt <= norm) {
            break;
        }
        (x, cfg, f, norm) = (trial, c, ft, nt);
        if longest < 1e-14 * scale {
            break;
        }
    }
    if let Some(e) = find_collision(&cfg, opts.collision_tol) {
        return Err(e);
    }
    // a genuine simple root polishes down to rounding level; a stalled pair
    // of nearly equal rapidities is a collision that merely passed the test
    if norm > STALL_FACTOR * opts.tol {
        if let Some(e) = find_collision(&cfg, NEAR_COLLISION) {
            return Err(e);
        }
    }
    let report = ConvergenceReport {
        iterations,
        residual: norm,
        termination: cfg.termination(),
        warnings: cfg.warnings().to_vec(),
    };
    Ok(BetheSolution { config: cfg, report })
}

/// Extra undamped Newton steps taken after convergence.
const POLISH_STEPS: usize = 12;

/// Polished residual above `STALL_FACTOR * tol` counts as stalled.
const STALL_FACTOR: f64 = 1e-2;

/// Separation below which a stalled solution is reported as a collision.
const NEAR_COLLISION: f64 = 1e-6;

/// Relative difference step while polishing; finer than the main loop so
/// the Jacobian still resolves rapidities closer than 1e-7.
const POLISH_FD_STEP: f64 = 1e-10;

type Eval<'a> = dyn Fn(&[Complex64]) -> Result<(BetheConfig, Vec<Complex64>)> + 'a;

/// Newton direction from a central-difference Jacobian; `None` when the
/// linear solve is not trustworthy.
fn newton_direction(
    eval: &Eval,
    x: &[Complex64],
    f: &[Complex64],
    norm: f64,
    rel_step: f64,
) -> Result<Option<Vec<Complex64>>> {
    let dim = x.len();
    let mut jac = Mat::<Complex64>::zeros(dim, dim);
    for j in 0..dim {
        let h = rel_step * x[j].norm().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (_, fp) = eval(&xp)?;
        let (_, fm) = eval(&xm)?;
        for i in 0..dim {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    let rhs = Mat::from_fn(dim, 1, |i, _| -f[i]);
    let dx = jac.partial_piv_lu().solve(&rhs);
    let finite = (0..dim).all(|i| dx[(i, 0)].re.is_finite() && dx[(i, 0)].im.is_finite());
    let back = &jac * &dx;
    let solve_err = (0..dim).map(|i| (back[(i, 0)] - rhs[(i, 0)]).norm()).fold(0.0, f64::max);
    if !finite || solve_err > 1e-6 * norm.max(1e-12) {
        return Ok(None);
    }
    Ok(Some((0..dim).map(|i| dx[(i, 0)]).collect()))
}

struct Step {
    x: Vec<Complex64>,
    cfg: BetheConfig,
    f: Vec<Complex64>,
    norm: f64,
}

/// Shortens `dx` to [`MAX_STEP`], then halves it up to 8 times until the
/// residual drops; falls back to the shortest finite trial.
fn damped_step(eval: &Eval, x: &[Complex64], dx: &[Complex64], norm: f64) -> Option<Step> {
    // rapidities live on a strip of width π; longer steps only escape to
    // the asymptotic region where the weights flatten out
    let longest = dx.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut t = if longest > MAX_STEP { MAX_STEP / longest } else { 1.0 };
    let mut fallback = None;
    for _ in 0..=8 {
        let trial: Vec<Complex64> = x.iter().zip(dx).map(|(a, d)| a + d * t).collect();
        if let Ok((cfg, f)) = eval(&trial) {
            let nt = max_abs(&f);
            let step = Step { x: trial, cfg, f, norm: nt };
            if nt < norm {
                return Some(step);
            }
            if nt.is_finite() {
                fallback = Some(step);
            }
        }
        t *= 0.5;
    }
    fallback
}

/// Which closed-form energy applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyFormula {
    Bosonic,
    Fermionic,
}

impl EnergyFormula {
    /// Chosen by the grade of the level-1 states (base index 1).
    pub fn for_model(model: &ModelSpec) -> Self {
        if model.base_grade(1) == 0 {
            EnergyFormula::Bosonic
        } else {
            EnergyFormula::Fermionic
        }
    }
}

/// γ = −log q on the principal branch.
pub fn gamma(model: &ModelSpec) -> Complex64 {
    -model.q().ln()
}

/// Closed-form energy, formula picked from the level-1 grade.
pub fn energy(cfg: &BetheConfig) -> Result<Complex64> {
    energy_with(cfg, EnergyFormula::for_model(cfg.model()))
}

/// Bosonic: Σ_y sinh γ / (sinh(λ¹_y + γ) sinh λ¹_y).
/// Fermionic: p0 − p1 − p0 coth γ + Σ_y coth λ¹_y.
pub fn energy_with(cfg: &BetheConfig, formula: EnergyFormula) -> Result<Complex64> {
    if !cfg.chain().is_homogeneous() {
        return Err(Error::Domain("energy formulas assume a homogeneous chain".into()));
    }
    let p0 = cfg.chain().p0();
    if let Some(k) = cfg.magnon_counts().iter().position(|&p| p >= p0) {
        return Err(Error::Domain(format!("energy formulas need p0 > p_k, violated at level {}", k + 1)));
    }
    let g = gamma(cfg.model());
    let level1 = cfg.level(1);
    let pole = |z: Complex64| z.sinh().norm() < 1e-12;
    for &l in level1 {
        if pole(l) || (formula == EnergyFormula::Bosonic && pole(l + g)) {
            return Err(Error::Domain(format!("energy pole at λ = {} + {}i", l.re, l.im)));
        }
    }
    Ok(match formula {
        EnergyFormula::Bosonic => level1.iter().map(|&l| g.sinh() / ((l + g).sinh() * l.sinh())).sum(),
        EnergyFormula::Fermionic => {
            let p0 = p0 as f64;
            let p1 = level1.len() as f64;
            let sum: Complex64 = level1.iter().map(|&l| l.cosh() / l.sinh()).sum();
            Complex64::new(p0 - p1, 0.0) - g.cosh() / g.sinh() * p0 + sum
        }
    })
}

/// Λ⁰′(0)/Λ⁰(0) by a fourth-order central difference (step 1e-3); the
/// eigenvalue of τ(0)⁻¹τ′(0) on the Bethe state.
pub fn log_derivative_energy(cfg: &BetheConfig) -> Result<Complex64> {
    let h = 1e-3;
    let at = |k: f64| eigenvalue_recursion(cfg, 0, Complex64::new(k * h, 0.0));
    let deriv = (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h);
    let value = at(0.0)?;
    if value.norm() < 1e-300 {
        return Err(Error::Domain("Λ⁰(0) vanishes".into()));
    }
    Ok(deriv / value)
}

/// Affine map E_ED ≈ scale · E_formula + shift, fixed from two reference
/// states and then frozen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyFit {
    pub scale: Complex64,
    pub shift: Complex64,
}

impl EnergyFit {
    pub fn fit(formula: [Complex64; 2], ed: [Complex64; 2]) -> Result<Self> {
        let den = formula[1] - formula[0];
        if den.norm() < 1e-12 {
            return Err(Error::Domain("reference energies coincide; fit is undetermined".into()));
        }
        let scale = (ed[1] - ed[0]) / den;
        Ok(Self { scale, shift: ed[0] - scale * formula[0] })
    }

    pub fn apply(&self, e: Complex64) -> Complex64 {
        self.scale * e + self.shift
    }
}

/// Closed-form one-magnon rapidity for one root of unity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OneMagnonRoot {
    pub branch: usize,
    pub omega: Complex64,
    pub lambda: Complex64,
}

/// Roots of b(λ) = ω, ω^{p0} = 1, on a homogeneous chain:
/// e^{2λ} = q(ωq − 1)/(ω − q). Branches where this degenerates are skipped.
pub fn one_magnon_roots(model: &ModelSpec, p0: usize) -> Vec<OneMagnonRoot> {
    let q = model.q();
    (0..p0)
        .filter_map(|branch| {
            let omega = Complex64::from_polar(1.0, 2.0 * PI * branch as f64 / p0 as f64);
            let num = q * (omega * q - ONE);
            let den = omega - q;
            if num.norm() < 1e-12 || den.norm() < 1e-12 {
                return None;
            }
            Some(OneMagnonRoot { branch, omega, lambda: (num / den).ln() * 0.5 })
        })
        .collect()
}

/// B_target(λ)|Ω₀⟩ with B_target = T^{â₀}_{target}, built from the
/// monodromy entry and applied to the product vacuum |â₀ … â₀⟩.
pub fn one_magnon_vector(
    chain: &ChainSpec,
    lambda: Complex64,
    target: StateIndex,
    vacuum_label: usize,
) -> Result<Vec<Complex64>> {
    let vacuum = StateIndex::new(0, vacuum_label);
    vacuum.flatten(chain.model())?;
    if target == vacuum {
        return Err(Error::Domain("target must differ from the pseudo-vacuum state".into()));
    }
    let b = monodromy_entry(chain, lambda, vacuum, target)?;
    let v = b.apply(&chain.uniform_state(vacuum)?)?;
    if v.iter().all(|z| z.norm() < 1e-300) {
        return Err(Error::ZeroVector);
    }
    Ok(v)
}
