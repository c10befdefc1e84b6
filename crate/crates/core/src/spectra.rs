//! Exact diagonalization, degeneracy classes and matching of Bethe ansatz
//! eigenvalues against the dense spectrum.

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bethe::{eigenvalue_recursion, BetheConfig};
use crate::chain::{transfer, ChainSpec};
use crate::error::{Error, Result};
use crate::graded_space::SpectralOperator;

/// Relative distance below which a Bethe eigenvalue is said to match ED.
pub const MATCH_TOLERANCE: f64 = 1e-8;

/// Looser relative window used to collect the candidate eigenspace before
/// the precise deviation is measured.
const CAPTURE_TOLERANCE: f64 = 1e-6;

const SPAN_CUTOFF: f64 = 1e-8;

pub fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Sorts by (real, imaginary).
pub fn sort_complex(values: &mut [Complex64]) {
    values.sort_by(cmp_complex);
}

fn check_finite(values: &[Complex64]) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Eigensolver)
    }
}

/// Eigenvalues of a general complex operator, sorted by (re, im).
pub fn dense_spectrum(op: &SpectralOperator) -> Result<Vec<Complex64>> {
    let mut values = op.entries().eigenvalues().map_err(|_| Error::Eigensolver)?;
    check_finite(&values)?;
    sort_complex(&mut values);
    Ok(values)
}

/// Eigenvalues (sorted) with unit-norm right eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<Complex64>,
    pub vectors: Mat<Complex64>,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }
}

pub fn eigensystem(op: &SpectralOperator) -> Result<Eigensystem> {
    let evd = op.entries().eigen().map_err(|_| Error::Eigensolver)?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let raw: Vec<Complex64> = (0..s.nrows()).map(|k| s[k]).collect();
    check_finite(&raw)?;
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| cmp_complex(&raw[a], &raw[b]));
    let d = u.nrows();
    let mut vectors = Mat::zeros(d, order.len());
    for (k, &src) in order.iter().enumerate() {
        let norm = (0..d).map(|i| u[(i, src)].norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Eigensolver);
        }
        for i in 0..d {
            vectors[(i, k)] = u[(i, src)] / norm;
        }
    }
    Ok(Eigensystem { values: order.iter().map(|&k| raw[k]).collect(), vectors })
}

/// |v − w| ≤ abs + rel·max(|v|, |w|) counts as equal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegeneracyTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for DegeneracyTolerance {
    fn default() -> Self {
        Self { abs: 1e-9, rel: 1e-9 }
    }
}

impl DegeneracyTolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { abs: tol, rel: tol }
    }

    fn window(&self, v: Complex64, w: Complex64) -> f64 {
        self.abs + self.rel * v.norm().max(w.norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegeneracyClass {
    pub value: Complex64,
    pub count: usize,
}

/// Clusters eigenvalues in (re, im) order. Each value joins the nearest
/// existing class within tolerance, otherwise opens a new one represented by
/// that value. Sorting first makes the result independent of input order.
pub fn degeneracy_histogram(eigs: &[Complex64], tol: DegeneracyTolerance) -> Vec<DegeneracyClass> {
    let mut sorted = eigs.to_vec();
    sort_complex(&mut sorted);
    let mut classes: Vec<DegeneracyClass> = Vec::new();
    for v in sorted {
        let mut best: Option<(usize, f64)> = None;
        for (k, class) in classes.iter().enumerate().rev() {
            let w = tol.window(v, class.value);
            if class.value.re < v.re - 2.0 * w {
                break;
            }
            let dist = (class.value - v).norm();
            if dist <= w && best.is_none_or(|(_, d)| dist < d) {
                best = Some((k, dist));
            }
        }
        match best {
            Some((k, _)) => classes[k].count += 1,
            None => classes.push(DegeneracyClass { value: v, count: 1 }),
        }
    }
    classes
}

/// Outcome of matching one Bethe solution against ED.
#[derive(Clone, Debug, PartialEq)]
pub struct AbaMatch {
    pub solution: usize,
    /// Index into the sorted spectrum at the first grid point of the closest
    /// eigenvalue; None when Λ⁰ could not be evaluated.
    pub eigenvalue_index: Option<usize>,
    pub max_relative_deviation: f64,
    pub matched: bool,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Spectrum of τ at the first grid point.
    pub eigenvalues: Vec<Complex64>,
    pub degeneracy_classes: Vec<DegeneracyClass>,
    pub matched_aba: Option<Vec<AbaMatch>>,
}

impl SpectrumReport {
    pub fn unmatched(&self) -> Vec<usize> {
        self.matched_aba.iter().flatten().filter(|m| !m.matched).map(|m| m.solution).collect()
    }
}

/// Simultaneous eigenspace of a commuting family on which each operator
/// takes its target eigenvalue, found by successive compression.
#[derive(Clone, Debug)]
pub struct JointEigenspace {
    pub eigenvalue_index: usize,
    /// Relative deviation at each grid point (∞ past the point where the
    /// space became empty).
    pub deviations: Vec<f64>,
    /// Columns span the joint eigenspace (possibly empty).
    pub basis: Mat<Complex64>,
}

impl JointEigenspace {
    pub fn max_deviation(&self) -> f64 {
        self.deviations.iter().copied().fold(0.0, f64::max)
    }
}

fn rel_dist(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Matrix of `op` restricted to the span of `basis`: (VᴴV)⁻¹ Vᴴ op V.
pub fn compress(op: &SpectralOperator, basis: &Mat<Complex64>) -> Mat<Complex64> {
    let gram = basis.adjoint() * basis;
    let image = basis.adjoint() * (op.entries() * basis);
    gram.partial_piv_lu().solve(&image)
}

/// Eigenvalues of `op` restricted to an invariant subspace.
pub fn restricted_eigenvalues(op: &SpectralOperator, basis: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    if basis.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut v = compress(op, basis).eigenvalues().map_err(|_| Error::Eigensolver)?;
    check_finite(&v)?;
    sort_complex(&mut v);
    Ok(v)
}

/// Starts from the eigenvectors of `first` near targets[0] and keeps, grid
/// point by grid point, the part of the space where ops[g] has eigenvalue
/// targets[g].
pub fn joint_eigenspace(
    first: &Eigensystem,
    ops: &[SpectralOperator],
    targets: &[Complex64],
) -> Result<JointEigenspace> {
    let t0 = targets[0];
    let dists: Vec<f64> = first.values.iter().map(|&v| rel_dist(v, t0)).collect();
    let (index, &dev0) = dists.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).ok_or(Error::Eigensolver)?;
    let mut deviations = vec![f64::INFINITY; targets.len()];
    deviations[0] = dev0;
    let cluster: Vec<usize> = (0..dists.len()).filter(|&k| dists[k] <= CAPTURE_TOLERANCE).collect();
    let d = first.vectors.nrows();
    let mut basis = orthonormal_span(&Mat::from_fn(d, cluster.len(), |i, k| first.vectors[(i, cluster[k])]))?;
    for g in 1..targets.len() {
        if basis.ncols() == 0 {
            break;
        }
        let m = compress(&ops[g], &basis);
        let evd = m.eigen().map_err(|_| Error::Eigensolver)?;
        let s = evd.S().column_vector();
        let w = evd.U();
        let local: Vec<f64> = (0..s.nrows()).map(|k| rel_dist(s[k], targets[g])).collect();
        deviations[g] = local.iter().copied().fold(f64::INFINITY, f64::min);
        let keep: Vec<usize> = (0..local.len()).filter(|&k| local[k] <= CAPTURE_TOLERANCE).collect();
        let sel = Mat::from_fn(w.nrows(), keep.len(), |i, k| w[(i, keep[k])]);
        basis = orthonormal_span(&(&basis * &sel))?;
    }
    Ok(JointEigenspace { eigenvalue_index: index, deviations, basis })
}

/// Orthonormal basis of the column span, dropping directions below 1e-8 of
/// the largest singular value. Eigenvectors from a defective or nearly
/// defective cluster are close to parallel and would otherwise make the
/// compression meaningless.
fn orthonormal_span(v: &Mat<Complex64>) -> Result<Mat<Complex64>> {
    if v.ncols() == 0 {
        return Ok(v.clone());
    }
    let svd = v.thin_svd().map_err(|_| Error::Eigensolver)?;
    let s = svd.S().column_vector();
    let top = (0..s.nrows()).map(|k| s[k].norm()).fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.nrows()).filter(|&k| s[k].norm() > SPAN_CUTOFF * top).collect();
    let u = svd.U();
    Ok(Mat::from_fn(v.nrows(), keep.len(), |i, k| u[(i, keep[k])]))
}

/// Transfer matrices on a μ-grid, evaluated concurrently.
pub fn transfer_grid(chain: &ChainSpec, mu_grid: &[Complex64]) -> Result<Vec<SpectralOperator>> {
    mu_grid.par_iter().map(|&mu| transfer(chain, mu)).collect()
}

/// Λ⁰ of every solution against the ED spectrum of τ on the grid. A solution
/// matches when Λ⁰(μ_g) is an eigenvalue on one common eigenspace at every
/// grid point, with relative deviation below 1e-8.
pub fn match_aba_to_ed(
    chain: &ChainSpec,
    solutions: &[BetheConfig],
    mu_grid: &[Complex64],
    tol: DegeneracyTolerance,
) -> Result<SpectrumReport> {
    if mu_grid.is_empty() {
        return Err(Error::Domain("matching needs at least one grid point".into()));
    }
    let taus = transfer_grid(chain, mu_grid)?;
    let first = eigensystem(&taus[0])?;
    let matches = solutions
        .par_iter()
        .enumerate()
        .map(|(id, sol)| {
            let targets: Result<Vec<Complex64>> = mu_grid.iter().map(|&mu| eigenvalue_recursion(sol, 0, mu)).collect();
            let Ok(targets) = targets else {
                return Ok(AbaMatch {
                    solution: id,
                    eigenvalue_index: None,
                    max_relative_deviation: f64::INFINITY,
                    matched: false,
                });
            };
            let joint = joint_eigenspace(&first, &taus, &targets)?;
            let dev = joint.max_deviation();
            Ok(AbaMatch {
                solution: id,
                eigenvalue_index: Some(joint.eigenvalue_index),
                max_relative_deviation: dev,
                matched: dev < MATCH_TOLERANCE,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumReport {
        degeneracy_classes: degeneracy_histogram(&first.values, tol),
        eigenvalues: first.values,
        matched_aba: Some(matches),
    })
}

/// Nearest-neighbour continuation of eigenvalue branches along a sequence of
/// eigensystems. When two candidates are equally close (within `tie`), the
/// one with the larger eigenvector overlap wins. Returns, per branch, the
/// eigenvalue index at every step.
pub fn track_branches(systems: &[Eigensystem], tie: f64) -> Vec<Vec<usize>> {
    let Some(first) = systems.first() else {
        return Vec::new();
    };
    let mut branches: Vec<Vec<usize>> = (0..first.values.len()).map(|k| vec![k]).collect();
    for g in 1..systems.len() {
        let (prev, next) = (&systems[g - 1], &systems[g]);
        let mut taken = vec![false; next.values.len()];
        for branch in branches.iter_mut() {
            let k = *branch.last().expect("branches start non-empty");
            let v = prev.values[k];
            let mut cands: Vec<(usize, f64)> =
                (0..next.values.len()).filter(|&j| !taken[j]).map(|j| (j, (next.values[j] - v).norm())).collect();
            cands.sort_by(|a, b| a.1.total_cmp(&b.1));
            let Some(&(_, best)) = cands.first() else {
                continue;
            };
            let overlap = |j: usize| -> f64 {
                (0..prev.vectors.nrows())
                    .map(|i| prev.vectors[(i, k)].conj() * next.vectors[(i, j)])
                    .sum::<Complex64>()
                    .norm()
            };
            let choice = cands
                .iter()
                .take_while(|c| c.1 <= best + tie)
                .map(|c| c.0)
                .max_by(|&a, &b| overlap(a).total_cmp(&overlap(b)))
                .expect("at least one candidate");
            taken[choice] = true;
            branch.push(choice);
        }
    }
    branches
}
