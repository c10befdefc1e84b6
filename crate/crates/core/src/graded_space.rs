//! Graded local spaces with multiplicity, operators on tensor products of
//! them, and the sign rules that tie everything together.
//!
//! Operators are stored as plain dense matrices in the product basis; every
//! Koszul sign is baked into the entries when the operator is built, so
//! composition is ordinary matrix multiplication and states are ordinary
//! column vectors.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Where the intra-set weight a_I sits once a base state is lifted to a
/// multiplet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LiftConvention {
    /// a_I on the intra-set exchange units e_b^a ⊗ e_a^b.
    Exchange,
    /// a_I on the intra-set diagonal units e_a^a ⊗ e_b^b.
    Diagonal,
}

/// Grades, multiplicities and deformation parameter of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    m: usize,
    n: usize,
    multiplicities: Vec<usize>,
    q: Complex64,
    lift_convention: LiftConvention,
}

impl ModelSpec {
    pub fn new(
        m: usize,
        n: usize,
        multiplicities: Vec<usize>,
        q: Complex64,
        lift_convention: LiftConvention,
    ) -> Result<Self> {
        if m + n < 2 {
            return Err(Error::InvalidModel(format!("m + n must be at least 2, got {}", m + n)));
        }
        if multiplicities.len() != m + n {
            return Err(Error::InvalidModel(format!(
                "expected {} multiplicities, got {}",
                m + n,
                multiplicities.len()
            )));
        }
        if let Some(i) = multiplicities.iter().position(|&k| k == 0) {
            return Err(Error::InvalidModel(format!("multiplicity of base state {i} is zero")));
        }
        if !(q.re.is_finite() && q.im.is_finite()) || q.norm() == 0.0 {
            return Err(Error::InvalidModel("q must be finite and nonzero".into()));
        }
        if (q * q - ONE).norm() < 1e-10 {
            return Err(Error::InvalidModel(format!("q² must differ from 1 (got q = {} + {}i)", q.re, q.im)));
        }
        Ok(Self { m, n, multiplicities, q, lift_convention })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    pub fn lift_convention(&self) -> LiftConvention {
        self.lift_convention
    }

    /// Number of base states, m + n.
    pub fn base_count(&self) -> usize {
        self.m + self.n
    }

    /// Local dimension N = Σ n_I.
    pub fn dim(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn is_bosonic(&self) -> bool {
        self.n == 0
    }

    pub fn has_multiplicity(&self) -> bool {
        self.multiplicities.iter().any(|&k| k > 1)
    }

    /// |I|: 0 for the first m base states, 1 after.
    pub fn base_grade(&self, base: usize) -> u8 {
        u8::from(base >= self.m)
    }

    /// First flattened ordinal belonging to base state `base`.
    pub fn offset(&self, base: usize) -> usize {
        self.multiplicities[..base].iter().sum()
    }

    /// Base index of every flattened ordinal.
    pub fn bases(&self) -> Vec<usize> {
        self.multiplicities.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect()
    }

    /// Grade of every flattened ordinal.
    pub fn grades(&self) -> Vec<u8> {
        self.bases().into_iter().map(|i| self.base_grade(i)).collect()
    }

    /// Same model with every multiplicity set to 1.
    pub fn base_model(&self) -> ModelSpec {
        ModelSpec { multiplicities: vec![1; self.base_count()], ..self.clone() }
    }

    pub fn with_convention(&self, lift_convention: LiftConvention) -> ModelSpec {
        ModelSpec { lift_convention, ..self.clone() }
    }

    pub fn with_q(&self, q: Complex64) -> Result<ModelSpec> {
        ModelSpec::new(self.m, self.n, self.multiplicities.clone(), q, self.lift_convention)
    }
}

/// A local basis state: base index I and label a ∈ A_I.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateIndex {
    pub base: usize,
    pub label: usize,
}

impl StateIndex {
    pub fn new(base: usize, label: usize) -> Self {
        Self { base, label }
    }

    pub fn flatten(&self, spec: &ModelSpec) -> Result<usize> {
        match spec.multiplicities.get(self.base) {
            Some(&k) if self.label < k => Ok(spec.offset(self.base) + self.label),
            _ => Err(Error::DimensionMismatch(format!(
                "state ({}, {}) does not exist in this model",
                self.base, self.label
            ))),
        }
    }

    pub fn unflatten(spec: &ModelSpec, ordinal: usize) -> Result<Self> {
        let mut rest = ordinal;
        for (base, &k) in spec.multiplicities.iter().enumerate() {
            if rest < k {
                return Ok(Self { base, label: rest });
            }
            rest -= k;
        }
        Err(Error::DimensionMismatch(format!("ordinal {ordinal} exceeds local dimension {}", spec.dim())))
    }

    pub fn grade(&self, spec: &ModelSpec) -> u8 {
        spec.base_grade(self.base)
    }
}

/// Canonical basis order: base index ascending, then label ascending.
pub fn enumerate_states(spec: &ModelSpec) -> Vec<StateIndex> {
    spec.multiplicities
        .iter()
        .enumerate()
        .flat_map(|(base, &k)| (0..k).map(move |label| StateIndex { base, label }))
        .collect()
}

/// Big-endian mixed-radix digits of `ordinal`.
pub fn unflatten_multi(mut ordinal: usize, factors: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; factors.len()];
    for (d, &f) in digits.iter_mut().zip(factors).rev() {
        *d = ordinal % f;
        ordinal /= f;
    }
    digits
}

pub fn flatten_multi(digits: &[usize], factors: &[usize]) -> usize {
    digits.iter().zip(factors).fold(0, |acc, (&d, &f)| acc * f + d)
}

/// Parity of the total grade of every basis state of `sites` local spaces.
pub fn multi_site_parity(spec: &ModelSpec, sites: usize) -> Vec<u8> {
    let g = spec.grades();
    let mut parity = vec![0u8];
    for _ in 0..sites {
        parity = parity.iter().flat_map(|&p| g.iter().map(move |&x| p ^ x)).collect();
    }
    parity
}

/// Dense complex operator on an ordered tensor product of local spaces.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    factors: Vec<usize>,
    entries: Mat<Complex64>,
}

impl PartialEq for SpectralOperator {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.entries == other.entries
    }
}

impl SpectralOperator {
    pub fn new(factors: Vec<usize>, entries: Mat<Complex64>) -> Result<Self> {
        let side: usize = factors.iter().product();
        if entries.nrows() != side || entries.ncols() != side {
            return Err(Error::DimensionMismatch(format!(
                "factors {factors:?} need a {side}x{side} matrix, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { factors, entries })
    }

    pub fn zeros(factors: Vec<usize>) -> Self {
        let side = factors.iter().product();
        Self { factors, entries: Mat::zeros(side, side) }
    }

    pub fn identity(factors: Vec<usize>) -> Self {
        let side = factors.iter().product();
        Self { factors, entries: Mat::identity(side, side) }
    }

    pub fn from_fn(factors: Vec<usize>, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let side = factors.iter().product();
        Self { factors, entries: Mat::from_fn(side, side, f) }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<Complex64> {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut Mat<Complex64> {
        &mut self.entries
    }

    pub fn into_entries(self) -> Mat<Complex64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[(row, col)] = value;
    }

    pub fn add_at(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[(row, col)] += value;
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.factors != other.factors {
            return Err(Error::DimensionMismatch(format!(
                "factor structures {:?} and {:?} differ",
                self.factors, other.factors
            )));
        }
        Ok(())
    }

    /// self · rhs.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self { factors: self.factors.clone(), entries: &self.entries * &rhs.entries })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self { factors: self.factors.clone(), entries: &self.entries + &rhs.entries })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs)?;
        Ok(Self { factors: self.factors.clone(), entries: &self.entries - &rhs.entries })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let entries = Mat::from_fn(self.side(), self.side(), |i, j| s * self.entries[(i, j)]);
        Self { factors: self.factors.clone(), entries }
    }

    /// self·rhs − rhs·self.
    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        self.compose(rhs)?.sub(&rhs.compose(self)?)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.side() {
            for i in 0..self.side() {
                best = best.max(self.entries[(i, j)].norm());
            }
        }
        best
    }

    /// Max-norm distance to another operator with the same factors.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        Ok(self.sub(rhs)?.max_abs())
    }

    /// Plain (unsigned) Kronecker product.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (da, db) = (self.side(), rhs.side());
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&rhs.factors);
        let entries =
            Mat::from_fn(da * db, da * db, |r, c| self.entries[(r / db, c / db)] * rhs.entries[(r % db, c % db)]);
        Self { factors, entries }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.side() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against operator of side {}",
                v.len(),
                self.side()
            )));
        }
        let mut out = vec![ZERO; v.len()];
        for (j, &x) in v.iter().enumerate() {
            if x == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.entries[(i, j)] * x;
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Self { factors: self.factors.clone(), entries: self.entries.transpose().to_owned() }
    }
}

fn require_local(op: &SpectralOperator, spec: &ModelSpec, what: &str) -> Result<usize> {
    let n = spec.dim();
    if op.factors.iter().any(|&f| f != n) {
        return Err(Error::DimensionMismatch(format!(
            "{what} has factors {:?}, expected local dimension {n}",
            op.factors
        )));
    }
    Ok(op.factors.len())
}

/// Graded tensor product A ⊗_s B. Entry ((I,J),(K,L)) carries the sign
/// (−1)^{|J|(|I|+|K|)} where I, K are the row/column states of A and J the
/// row state of B (multi-site grades add).
pub fn graded_tensor(a: &SpectralOperator, b: &SpectralOperator, spec: &ModelSpec) -> Result<SpectralOperator> {
    let sa = require_local(a, spec, "left operand")?;
    let sb = require_local(b, spec, "right operand")?;
    let pa = multi_site_parity(spec, sa);
    let pb = multi_site_parity(spec, sb);
    let db = b.side();
    let mut out = a.kron(b);
    for r in 0..out.side() {
        for c in 0..out.side() {
            if (pa[r / db] ^ pa[c / db]) & pb[r % db] == 1 {
                let v = out.entries[(r, c)];
                out.entries[(r, c)] = -v;
            }
        }
    }
    Ok(out)
}

/// Graded permutation P: |i j⟩ ↦ (−1)^{|i||j|} |j i⟩, so P² = 1.
pub fn graded_permutation(spec: &ModelSpec) -> SpectralOperator {
    let n = spec.dim();
    let g = spec.grades();
    let mut p = SpectralOperator::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            let s = if g[i] & g[j] == 1 { -ONE } else { ONE };
            p.set(j * n + i, i * n + j, s);
        }
    }
    p
}

/// Partial supertrace over factor 0: Σ_a (−1)^{|a|} O[(a,·),(a,·)].
pub fn supertrace_aux(op: &SpectralOperator, spec: &ModelSpec) -> Result<SpectralOperator> {
    let n = spec.dim();
    if op.factors.first() != Some(&n) {
        return Err(Error::DimensionMismatch(format!(
            "auxiliary factor must have dimension {n}, operator has factors {:?}",
            op.factors
        )));
    }
    let g = spec.grades();
    let rest = op.factors[1..].to_vec();
    let d: usize = rest.iter().product();
    let mut out = SpectralOperator::zeros(rest);
    for (a, &ga) in g.iter().enumerate() {
        let s = if ga == 1 { -1.0 } else { 1.0 };
        for c in 0..d {
            for r in 0..d {
                out.entries[(r, c)] += op.entries[(a * d + r, a * d + c)] * s;
            }
        }
    }
    Ok(out)
}

/// Koszul exponent for moving sites `i` then `j` to the front of a product
/// state with site grades `g`.
fn front_sign(g: &[u8], i: usize, j: usize) -> u8 {
    let below = |x: usize, skip: usize| -> u8 {
        g[..x].iter().enumerate().filter(|&(y, _)| y != skip).fold(0, |acc, (_, &v)| acc ^ v)
    };
    (g[i] & below(i, usize::MAX)) ^ (g[j] & below(j, i))
}

/// Embeds an even two-site operator on sites `i`, `j` (0-based, distinct) of
/// an `nsites`-site chain, first factor on `i`. Sign bookkeeping follows the
/// graded site permutation that brings (i, j) to the front.
pub fn embed_pair(
    op: &SpectralOperator,
    spec: &ModelSpec,
    nsites: usize,
    i: usize,
    j: usize,
) -> Result<SpectralOperator> {
    if require_local(op, spec, "pair operator")? != 2 {
        return Err(Error::DimensionMismatch("pair operator must act on two sites".into()));
    }
    if i == j || i >= nsites || j >= nsites {
        return Err(Error::DimensionMismatch(format!("cannot embed on sites ({i}, {j}) of a {nsites}-site chain")));
    }
    let n = spec.dim();
    let grades = spec.grades();
    let factors = vec![n; nsites];
    let mut out = SpectralOperator::zeros(factors.clone());
    let mut sg = vec![0u8; nsites];
    for col in 0..out.side() {
        let digits = unflatten_multi(col, &factors);
        for (s, &d) in sg.iter_mut().zip(&digits) {
            *s = grades[d];
        }
        let sign_in = front_sign(&sg, i, j);
        let local_col = digits[i] * n + digits[j];
        for ti in 0..n {
            for tj in 0..n {
                let v = op.entries[(ti * n + tj, local_col)];
                if v == ZERO {
                    continue;
                }
                let mut new = digits.clone();
                new[i] = ti;
                new[j] = tj;
                let mut tg = sg.clone();
                tg[i] = grades[ti];
                tg[j] = grades[tj];
                let sign = sign_in ^ front_sign(&tg, i, j);
                let row = flatten_multi(&new, &factors);
                out.entries[(row, col)] += if sign == 1 { -v } else { v };
            }
        }
    }
    Ok(out)
}

/// Graded site permutation: the output state holds at position k the content
/// of input position `perm[k]`, with sign (−1)^{#odd-odd inversions}.
pub fn site_permutation(spec: &ModelSpec, perm: &[usize]) -> Result<SpectralOperator> {
    let nsites = perm.len();
    let mut seen = vec![false; nsites];
    for &p in perm {
        if p >= nsites || seen[p] {
            return Err(Error::DimensionMismatch(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    let n = spec.dim();
    let grades = spec.grades();
    let factors = vec![n; nsites];
    let mut out = SpectralOperator::zeros(factors.clone());
    for col in 0..out.side() {
        let digits = unflatten_multi(col, &factors);
        let new: Vec<usize> = perm.iter().map(|&p| digits[p]).collect();
        let mut odd = 0u8;
        for k in 0..nsites {
            for l in k + 1..nsites {
                if perm[k] > perm[l] {
                    odd ^= grades[new[k]] & grades[new[l]];
                }
            }
        }
        let v = if odd == 1 { -ONE } else { ONE };
        out.entries[(flatten_multi(&new, &factors), col)] = v;
    }
    Ok(out)
}

/// Cyclic translation of a closed chain by one site (graded).
pub fn translation_operator(spec: &ModelSpec, nsites: usize) -> Result<SpectralOperator> {
    let perm: Vec<usize> = (0..nsites).map(|k| (k + nsites - 1) % nsites).collect();
    site_permutation(spec, &perm)
}

/// Swaps labels `a` and `b` of base state `base` on every site. Even, so no
/// signs.
pub fn label_permutation_operator(
    spec: &ModelSpec,
    nsites: usize,
    base: usize,
    a: usize,
    b: usize,
) -> Result<SpectralOperator> {
    let ia = StateIndex::new(base, a).flatten(spec)?;
    let ib = StateIndex::new(base, b).flatten(spec)?;
    let n = spec.dim();
    let local: Vec<usize> = (0..n)
        .map(|x| {
            if x == ia {
                ib
            } else if x == ib {
                ia
            } else {
                x
            }
        })
        .collect();
    let factors = vec![n; nsites];
    let mut out = SpectralOperator::zeros(factors.clone());
    for col in 0..out.side() {
        let digits: Vec<usize> = unflatten_multi(col, &factors).into_iter().map(|d| local[d]).collect();
        out.entries[(flatten_multi(&digits, &factors), col)] = ONE;
    }
    Ok(out)
}

/// Product basis state |s_1 … s_p⟩ as a column vector.
pub fn basis_vector(spec: &ModelSpec, sites: &[StateIndex]) -> Result<Vec<Complex64>> {
    let n = spec.dim();
    let factors = vec![n; sites.len()];
    let digits = sites.iter().map(|s| s.flatten(spec)).collect::<Result<Vec<_>>>()?;
    let mut v = vec![ZERO; n.pow(sites.len() as u32)];
    v[flatten_multi(&digits, &factors)] = ONE;
    Ok(v)
}
