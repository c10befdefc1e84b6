//! Inhomogeneous closed chains: Lax operators, monodromy, (super)transfer
//! matrix, RTT and commutativity residuals, and the nearest-neighbour
//! Hamiltonian.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graded_space::{embed_pair, graded_permutation, LiftConvention, ModelSpec, SpectralOperator, StateIndex};
use crate::rmatrix::build_r_lifted;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

pub const DEFAULT_DIMENSION_CAP: usize = 16384;

/// A closed chain of p0 sites with level-0 inhomogeneities λ⁰_x.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSpec {
    model: ModelSpec,
    inhomogeneities: Vec<Complex64>,
    cap: usize,
}

impl ChainSpec {
    pub fn new(model: ModelSpec, inhomogeneities: Vec<Complex64>) -> Result<Self> {
        Self::with_cap(model, inhomogeneities, DEFAULT_DIMENSION_CAP)
    }

    pub fn homogeneous(model: ModelSpec, p0: usize) -> Result<Self> {
        Self::new(model, vec![ZERO; p0])
    }

    pub fn with_cap(model: ModelSpec, inhomogeneities: Vec<Complex64>, cap: usize) -> Result<Self> {
        if inhomogeneities.is_empty() {
            return Err(Error::InvalidChain("chain length p0 must be at least 1".into()));
        }
        if inhomogeneities.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidChain("inhomogeneities must be finite".into()));
        }
        let dim = (model.dim() as u128).checked_pow(inhomogeneities.len() as u32);
        match dim {
            Some(d) if d <= cap as u128 => {}
            _ => {
                return Err(Error::DimensionCap {
                    dim: dim.map_or(usize::MAX, |d| d.min(usize::MAX as u128) as usize),
                    cap,
                })
            }
        }
        Ok(Self { model, inhomogeneities, cap })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn p0(&self) -> usize {
        self.inhomogeneities.len()
    }

    pub fn inhomogeneities(&self) -> &[Complex64] {
        &self.inhomogeneities
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Hilbert space dimension N^{p0}.
    pub fn dim(&self) -> usize {
        self.model.dim().pow(self.p0() as u32)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.inhomogeneities.iter().all(|z| z.norm() < 1e-14)
    }

    /// Same chain over a different model (e.g. the base model).
    pub fn with_model(&self, model: ModelSpec) -> Result<Self> {
        Self::with_cap(model, self.inhomogeneities.clone(), self.cap)
    }

    /// Product state |s s … s⟩.
    pub fn uniform_state(&self, state: StateIndex) -> Result<Vec<Complex64>> {
        crate::graded_space::basis_vector(&self.model, &vec![state; self.p0()])
    }
}

/// L_{αx}(μ) = R(μ − λ⁰_x), factor 0 being the auxiliary space. Sites are
/// numbered 1..=p0.
pub fn lax(chain: &ChainSpec, x: usize, mu: Complex64) -> Result<SpectralOperator> {
    if x == 0 || x > chain.p0() {
        return Err(Error::SiteOutOfRange { site: x, p0: chain.p0() });
    }
    build_r_lifted(&chain.model, mu - chain.inhomogeneities[x - 1])
}

/// Nonzero entries of one Lax operator, listed per column (aux, site).
struct SparseLax {
    columns: Vec<Vec<(usize, usize, Complex64)>>,
}

impl SparseLax {
    fn new(r: &SpectralOperator, n: usize) -> Self {
        let columns = (0..n * n)
            .map(|col| {
                (0..n * n)
                    .filter_map(|row| {
                        let v = r.get(row, col);
                        (v != ZERO).then_some((row / n, row % n, v))
                    })
                    .collect()
            })
            .collect();
        Self { columns }
    }
}

/// Column-by-column application of T = L_{p0} ⋯ L_1 on a product state.
struct Propagator {
    n: usize,
    p0: usize,
    grades: Vec<u8>,
    strides: Vec<usize>,
    laxes: Vec<SparseLax>,
}

impl Propagator {
    fn new(chain: &ChainSpec, mu: Complex64) -> Result<Self> {
        let n = chain.model.dim();
        let p0 = chain.p0();
        let laxes = (1..=p0).map(|x| lax(chain, x, mu).map(|r| SparseLax::new(&r, n))).collect::<Result<Vec<_>>>()?;
        let strides = (0..p0).map(|x| n.pow((p0 - 1 - x) as u32)).collect();
        Ok(Self { n, p0, grades: chain.model.grades(), strides, laxes })
    }

    /// T acting on |aux⟩⊗|chain⟩; returns (aux', chain', amplitude), sorted.
    fn run(&self, aux: usize, chain: usize) -> Vec<(usize, usize, Complex64)> {
        let mut terms = vec![(aux, chain, ONE)];
        let mut next = Vec::new();
        for x in 0..self.p0 {
            let stride = self.strides[x];
            next.clear();
            for &(a, ch, amp) in &terms {
                // grade parity of sites already passed by the auxiliary space
                let prefix = (0..x).fold(0u8, |p, y| p ^ self.grades[(ch / self.strides[y]) % self.n]);
                let s = (ch / stride) % self.n;
                for &(a2, s2, v) in &self.laxes[x].columns[a * self.n + s] {
                    let odd = (self.grades[a] ^ self.grades[a2]) & prefix;
                    let w = if odd == 1 { -(amp * v) } else { amp * v };
                    next.push((a2, ch - s * stride + s2 * stride, w));
                }
            }
            next.sort_by_key(|&(a, ch, _)| (a, ch));
            terms.clear();
            for &(a, ch, w) in &next {
                match terms.last_mut() {
                    Some(last) if last.0 == a && last.1 == ch => last.2 += w,
                    _ => terms.push((a, ch, w)),
                }
            }
            terms.retain(|t| t.2 != ZERO);
        }
        terms
    }
}

/// Monodromy T(μ) on aux ⊗ chain.
pub fn monodromy(chain: &ChainSpec, mu: Complex64) -> Result<SpectralOperator> {
    let prop = Propagator::new(chain, mu)?;
    let n = chain.model.dim();
    let d = chain.dim();
    let mut factors = vec![n];
    factors.extend(std::iter::repeat_n(n, chain.p0()));
    let columns: Vec<_> = (0..n * d).into_par_iter().map(|col| prop.run(col / d, col % d)).collect();
    let mut t = SpectralOperator::zeros(factors);
    for (col, terms) in columns.into_iter().enumerate() {
        for (a, ch, v) in terms {
            t.set(a * d + ch, col, v);
        }
    }
    Ok(t)
}

/// The same monodromy assembled as a dense product of embedded Lax operators.
pub fn monodromy_dense(chain: &ChainSpec, mu: Complex64) -> Result<SpectralOperator> {
    let p0 = chain.p0();
    let n = chain.model.dim();
    let mut t = SpectralOperator::identity(vec![n; p0 + 1]);
    for x in 1..=p0 {
        let l = embed_pair(&lax(chain, x, mu)?, &chain.model, p0 + 1, 0, x)?;
        t = l.compose(&t)?;
    }
    Ok(t)
}

/// Chain operator T^{out}_{in}(μ): the auxiliary space enters in `input` and
/// leaves in `output`.
pub fn monodromy_entry(
    chain: &ChainSpec,
    mu: Complex64,
    output: StateIndex,
    input: StateIndex,
) -> Result<SpectralOperator> {
    let a_out = output.flatten(&chain.model)?;
    let a_in = input.flatten(&chain.model)?;
    let prop = Propagator::new(chain, mu)?;
    let d = chain.dim();
    let columns: Vec<_> = (0..d).into_par_iter().map(|ch| prop.run(a_in, ch)).collect();
    let mut out = SpectralOperator::zeros(vec![chain.model.dim(); chain.p0()]);
    for (col, terms) in columns.into_iter().enumerate() {
        for (a, ch, v) in terms {
            if a == a_out {
                out.set(ch, col, v);
            }
        }
    }
    Ok(out)
}

/// τ(μ): supertrace of T over the auxiliary space (plain trace when n = 0).
pub fn transfer(chain: &ChainSpec, mu: Complex64) -> Result<SpectralOperator> {
    let prop = Propagator::new(chain, mu)?;
    let n = chain.model.dim();
    let d = chain.dim();
    let grades = chain.model.grades();
    let columns: Vec<Vec<(usize, Complex64)>> = (0..d)
        .into_par_iter()
        .map(|ch| {
            let mut acc: Vec<(usize, Complex64)> = Vec::new();
            for (a, &ga) in grades.iter().enumerate() {
                for (a2, row, v) in prop.run(a, ch) {
                    if a2 == a {
                        acc.push((row, if ga == 1 { -v } else { v }));
                    }
                }
            }
            acc
        })
        .collect();
    let mut tau = SpectralOperator::zeros(vec![n; chain.p0()]);
    for (col, entries) in columns.into_iter().enumerate() {
        for (row, v) in entries {
            tau.add_at(row, col, v);
        }
    }
    Ok(tau)
}

/// ‖R₁₂(λ−μ)T₁(λ)T₂(μ) − T₂(μ)T₁(λ)R₁₂(λ−μ)‖ in max-norm, on
/// aux₁ ⊗ aux₂ ⊗ chain.
pub fn rtt_residual(chain: &ChainSpec, lambda: Complex64, mu: Complex64) -> Result<f64> {
    let n = chain.model.dim();
    let id_aux = SpectralOperator::identity(vec![n]);
    let id_chain = SpectralOperator::identity(vec![n; chain.p0()]);
    let p12 = graded_permutation(&chain.model).kron(&id_chain);
    let t1 = {
        let t2_lambda = id_aux.kron(&monodromy(chain, lambda)?);
        p12.compose(&t2_lambda)?.compose(&p12)?
    };
    let t2 = id_aux.kron(&monodromy(chain, mu)?);
    let r12 = build_r_lifted(&chain.model, lambda - mu)?.kron(&id_chain);
    let lhs = r12.compose(&t1)?.compose(&t2)?;
    let rhs = t2.compose(&t1)?.compose(&r12)?;
    lhs.max_abs_diff(&rhs)
}

/// ‖[τ(μ), τ(ν)]‖ in max-norm.
pub fn transfer_commutator(chain: &ChainSpec, mu: Complex64, nu: Complex64) -> Result<f64> {
    let (a, b) = rayon::join(|| transfer(chain, mu), || transfer(chain, nu));
    Ok(a?.commutator(&b?)?.max_abs())
}

/// Coefficients of the two-site density P·R′(0), read off from the weight
/// derivatives at λ = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianCoefficients {
    /// (−1)^{|I|} a_I′(0) for fermionic I: −2(1+q²)/(1−q²).
    pub intra_fermion: Complex64,
    /// b′(0) = 2q/(1−q²), on the graded inter-set exchange.
    pub exchange: Complex64,
    /// d′(0) = −2/(1−q²), diagonal term for I < J.
    pub lower: Complex64,
    /// c′(0) = −2q²/(1−q²), diagonal term for I > J.
    pub upper: Complex64,
}

impl HamiltonianCoefficients {
    pub fn new(q: Complex64) -> Self {
        let q2 = q * q;
        let den = ONE - q2;
        Self {
            intra_fermion: -(ONE + q2) * 2.0 / den,
            exchange: q * 2.0 / den,
            lower: -ONE * 2.0 / den,
            upper: -q2 * 2.0 / den,
        }
    }
}

/// Closed-form two-site density. The fermionic intra-set term sits on the
/// exchange units under the Diagonal lift and on the diagonal units under the
/// Exchange lift (where R′(0) puts it).
pub fn hamiltonian_density_closed(model: &ModelSpec) -> SpectralOperator {
    let k = HamiltonianCoefficients::new(model.q());
    let n = model.dim();
    let bases = model.bases();
    let mut h = SpectralOperator::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            let (bi, bj) = (bases[i], bases[j]);
            let col = i * n + j;
            let swapped = j * n + i;
            if bi == bj {
                if model.base_grade(bi) == 1 {
                    match model.lift_convention() {
                        LiftConvention::Diagonal => h.add_at(swapped, col, k.intra_fermion),
                        LiftConvention::Exchange => h.add_at(col, col, k.intra_fermion),
                    }
                }
            } else {
                let sign = if model.base_grade(bi) & model.base_grade(bj) == 1 { -1.0 } else { 1.0 };
                h.add_at(swapped, col, k.exchange * sign);
                h.add_at(col, col, if bi < bj { k.lower } else { k.upper });
            }
        }
    }
    h
}

/// P·(R(h) − R(−h))/(2h).
pub fn hamiltonian_density_fd(model: &ModelSpec, h: f64) -> Result<SpectralOperator> {
    let step = Complex64::new(h, 0.0);
    let dr = build_r_lifted(model, step)?.sub(&build_r_lifted(model, -step)?)?;
    Ok(graded_permutation(model).compose(&dr)?.scale(Complex64::new(0.5 / h, 0.0)))
}

/// Σ over the p0 bonds of a closed chain, (x, x+1) and the wrap bond (p0, 1).
pub fn sum_over_bonds(chain: &ChainSpec, density: &SpectralOperator) -> Result<SpectralOperator> {
    let p0 = chain.p0();
    if p0 < 2 {
        return Err(Error::InvalidChain("a Hamiltonian needs at least two sites".into()));
    }
    let mut h = SpectralOperator::zeros(vec![chain.model.dim(); p0]);
    for x in 0..p0 {
        h = h.add(&embed_pair(density, &chain.model, p0, x, (x + 1) % p0)?)?;
    }
    Ok(h)
}

fn require_homogeneous(chain: &ChainSpec) -> Result<()> {
    if !chain.is_homogeneous() {
        return Err(Error::Domain("the Hamiltonian assumes vanishing inhomogeneities".into()));
    }
    Ok(())
}

/// Closed-chain Hamiltonian from the closed-form density.
pub fn hamiltonian_closed(chain: &ChainSpec) -> Result<SpectralOperator> {
    require_homogeneous(chain)?;
    sum_over_bonds(chain, &hamiltonian_density_closed(&chain.model))
}

/// Closed-chain Hamiltonian from the central-difference density.
pub fn hamiltonian_fd(chain: &ChainSpec, h: f64) -> Result<SpectralOperator> {
    require_homogeneous(chain)?;
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::Domain(format!("finite-difference step {h} outside [1e-6, 1e-3]")));
    }
    sum_over_bonds(chain, &hamiltonian_density_fd(&chain.model, h)?)
}
