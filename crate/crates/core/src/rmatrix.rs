//! Trigonometric su(m|n) R-matrix, its multiplicity lift, and the identity
//! checks (Yang-Baxter, regularity, form constraint).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graded_space::{graded_permutation, LiftConvention, ModelSpec, SpectralOperator};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Distance to the pole e^{2λ} = q² below which weights are refused.
pub const POLE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    /// a_I for base index I.
    A(usize),
    B,
    C,
    D,
}

/// All four weights at one spectral argument, with a_I resolved per base
/// index.
#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannWeights {
    pub a: Vec<Complex64>,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl BoltzmannWeights {
    pub fn at(spec: &ModelSpec, lambda: Complex64) -> Result<Self> {
        let q2 = spec.q() * spec.q();
        let x = (lambda * 2.0).exp();
        let den = q2 - x;
        if den.norm() < POLE_TOLERANCE {
            return Err(Error::Pole { arg: lambda });
        }
        let a = (0..spec.base_count()).map(|i| grade_a(spec.q(), spec.base_grade(i), x) / den).collect();
        Ok(Self { a, b: spec.q() * (ONE - x) / den, c: (q2 - ONE) * x / den, d: (q2 - ONE) / den })
    }

    /// t_IJ: c for I > J, d for I < J.
    pub fn t(&self, i: usize, j: usize) -> Complex64 {
        if i > j {
            self.c
        } else {
            self.d
        }
    }
}

fn grade_a(q: Complex64, grade: u8, x: Complex64) -> Complex64 {
    let q2 = q * q;
    if grade == 0 {
        q2 - x
    } else {
        ONE - q2 * x
    }
}

/// A single weight. The caller picks C or D according to base-index order.
pub fn weight(kind: WeightKind, lambda: Complex64, spec: &ModelSpec) -> Result<Complex64> {
    let w = BoltzmannWeights::at(spec, lambda)?;
    Ok(match kind {
        WeightKind::A(i) => *w.a.get(i).ok_or_else(|| {
            Error::DimensionMismatch(format!("no base index {i} in a model with {} of them", w.a.len()))
        })?,
        WeightKind::B => w.b,
        WeightKind::C => w.c,
        WeightKind::D => w.d,
    })
}

/// R-matrix of the model with every multiplicity forced to 1.
pub fn build_r_base(spec: &ModelSpec, lambda: Complex64) -> Result<SpectralOperator> {
    build_r_lifted(&spec.base_model(), lambda)
}

/// Lifted R(λ) on V⊗V, as components in the product basis. Column (i, j)
/// with i ∈ A_I, j ∈ A_J:
///   I ≠ J: b on (i, j) and (−1)^{|I||J|} t_IJ on (j, i);
///   I = J: a_I on (i, j) (Diagonal) or on (j, i) (Exchange).
pub fn build_r_lifted(spec: &ModelSpec, lambda: Complex64) -> Result<SpectralOperator> {
    let w = BoltzmannWeights::at(spec, lambda)?;
    let n = spec.dim();
    let bases = spec.bases();
    let mut r = SpectralOperator::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            let (bi, bj) = (bases[i], bases[j]);
            let col = i * n + j;
            let swapped = j * n + i;
            if bi != bj {
                r.add_at(col, col, w.b);
                let sign = if spec.base_grade(bi) & spec.base_grade(bj) == 1 { -1.0 } else { 1.0 };
                r.add_at(swapped, col, w.t(bi, bj) * sign);
            } else {
                match spec.lift_convention() {
                    LiftConvention::Diagonal => r.add_at(col, col, w.a[bi]),
                    LiftConvention::Exchange => r.add_at(swapped, col, w.a[bi]),
                }
            }
        }
    }
    Ok(r)
}

/// True iff every nonzero entry maps a pair of states onto the same
/// multiset of states.
pub fn check_form_constraint(r: &SpectralOperator, spec: &ModelSpec) -> bool {
    let n = spec.dim();
    if r.factors() != [n, n] {
        return false;
    }
    for row in 0..n * n {
        for col in 0..n * n {
            if r.get(row, col) == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (r1, r2) = (row / n, row % n);
            let (c1, c2) = (col / n, col % n);
            let same = (r1 == c1 && r2 == c2) || (r1 == c2 && r2 == c1);
            if !same {
                return false;
            }
        }
    }
    true
}

/// Residual of R₁₂(u−v)R₁₃(u−w)R₂₃(v−w) = R₂₃(v−w)R₁₃(u−w)R₁₂(u−v) for an
/// arbitrary R builder. R₁₃ is obtained by conjugating R₁₂ with P₂₃.
pub fn check_ybe_with<F>(spec: &ModelSpec, u: Complex64, v: Complex64, w: Complex64, build: F) -> Result<f64>
where
    F: Fn(Complex64) -> Result<SpectralOperator>,
{
    let n = spec.dim();
    let id = SpectralOperator::identity(vec![n]);
    let p23 = id.kron(&graded_permutation(spec));
    let r_uv = build(u - v)?;
    let r_uw = build(u - w)?;
    let r_vw = build(v - w)?;
    let r12 = r_uv.kron(&id);
    let r13 = p23.compose(&r_uw.kron(&id))?.compose(&p23)?;
    let r23 = id.kron(&r_vw);
    let lhs = r12.compose(&r13)?.compose(&r23)?;
    let rhs = r23.compose(&r13)?.compose(&r12)?;
    lhs.max_abs_diff(&rhs)
}

/// Yang-Baxter residual (max-norm) of the lifted R under `convention`.
pub fn check_ybe(
    spec: &ModelSpec,
    u: Complex64,
    v: Complex64,
    w: Complex64,
    convention: LiftConvention,
) -> Result<f64> {
    let s = spec.with_convention(convention);
    check_ybe_with(&s, u, v, w, |x| build_r_lifted(&s, x))
}

/// What R(0) should be: the graded permutation for Exchange; for Diagonal the
/// same on inter-set blocks and (−1)^{|I|} on the intra-set diagonal.
pub fn regular_reference(spec: &ModelSpec) -> SpectralOperator {
    let p = graded_permutation(spec);
    if spec.lift_convention() == LiftConvention::Exchange {
        return p;
    }
    let n = spec.dim();
    let bases = spec.bases();
    let mut out = p;
    for i in 0..n {
        for j in 0..n {
            if bases[i] == bases[j] {
                let s = if spec.base_grade(bases[i]) == 1 { -ONE } else { ONE };
                out.set(j * n + i, i * n + j, Complex64::new(0.0, 0.0));
                out.set(i * n + j, i * n + j, s);
            }
        }
    }
    out
}

/// ‖R(0) − regular_reference‖ in max-norm.
pub fn regularity_residual(spec: &ModelSpec) -> Result<f64> {
    build_r_lifted(spec, Complex64::new(0.0, 0.0))?.max_abs_diff(&regular_reference(spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graded_space::{enumerate_states, StateIndex};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn spec(m: usize, n: usize, mult: &[usize], q: Complex64, lc: LiftConvention) -> ModelSpec {
        ModelSpec::new(m, n, mult.to_vec(), q, lc).unwrap()
    }

    #[test]
    fn weights_at_zero() {
        let s = spec(1, 1, &[1, 1], cx(0.8, 0.3), LiftConvention::Exchange);
        let w = BoltzmannWeights::at(&s, cx(0.0, 0.0)).unwrap();
        assert_eq!(w.a, vec![ONE, -ONE]);
        assert_eq!(w.b, cx(0.0, 0.0));
        assert_eq!(w.c, ONE);
        assert_eq!(w.d, ONE);
    }

    #[test]
    fn pole_is_an_error() {
        let q = cx(0.8, 0.3);
        let s = spec(2, 0, &[1, 1], q, LiftConvention::Exchange);
        let lam = q.ln();
        assert!(matches!(weight(WeightKind::B, lam, &s), Err(Error::Pole { .. })));
        assert!(matches!(build_r_lifted(&s, lam + cx(0.0, std::f64::consts::PI)), Err(Error::Pole { .. })));
        assert!(weight(WeightKind::B, lam + cx(1e-6, 0.0), &s).is_ok());
    }

    #[test]
    fn base_r_at_zero_is_graded_permutation() {
        let q = cx(0.6, -0.2);
        for (m, n) in [(2, 0), (1, 1)] {
            let s = spec(m, n, &[1, 1], q, LiftConvention::Diagonal);
            let r = build_r_base(&s, cx(0.0, 0.0)).unwrap();
            assert_eq!(r, graded_permutation(&s));
        }
    }

    #[test]
    fn diagonal_lift_at_zero_is_identity_on_two_boson_block() {
        let s = spec(1, 1, &[2, 1], cx(0.6, 0.1), LiftConvention::Diagonal);
        let r = build_r_lifted(&s, cx(0.0, 0.0)).unwrap();
        let block = [0usize, 1, 3, 4]; // (0,0),(0,1),(1,0),(1,1) in the 3x3 product basis
        for &row in &block {
            for &col in &block {
                assert_eq!(r.get(row, col), if row == col { ONE } else { cx(0.0, 0.0) });
            }
        }
    }

    #[test]
    fn exchange_lift_at_zero_is_graded_permutation() {
        let s = spec(1, 1, &[2, 1], cx(0.6, 0.1), LiftConvention::Exchange);
        let r = build_r_lifted(&s, cx(0.0, 0.0)).unwrap();
        assert_eq!(r, graded_permutation(&s));
    }

    #[test]
    fn regularity_for_both_conventions() {
        for lc in [LiftConvention::Exchange, LiftConvention::Diagonal] {
            let s = spec(2, 1, &[2, 1, 3], cx(1.3, 0.4), lc);
            assert!(regularity_residual(&s).unwrap() <= 1e-14);
        }
    }

    #[test]
    fn ybe_bosonic_trigonometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let q = cx(rng.random_range(0.3..1.5), rng.random_range(-0.5..0.5));
            let s = spec(2, 0, &[1, 1], q, LiftConvention::Exchange);
            let pt = |rng: &mut ChaCha8Rng| cx(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
            let (u, v, w) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
            if let Ok(res) = check_ybe(&s, u, v, w, LiftConvention::Exchange) {
                assert!(res < 1e-12, "residual {res}");
            }
        }
    }

    #[test]
    fn ybe_exchange_lift_with_multiplicity() {
        let s = spec(1, 1, &[2, 1], cx(0.7, 0.25), LiftConvention::Exchange);
        let res = check_ybe(&s, cx(0.3, 0.1), cx(-0.2, 0.4), cx(0.05, -0.3), LiftConvention::Exchange).unwrap();
        assert!(res < 1e-12, "residual {res}");
    }

    #[test]
    fn ybe_at_coincident_points_is_exact_for_exchange() {
        let s = spec(2, 1, &[2, 1, 3], cx(0.7, 0.25), LiftConvention::Exchange);
        let z = cx(0.0, 0.0);
        assert_eq!(check_ybe(&s, z, z, z, LiftConvention::Exchange).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_lift_breaks_ybe_once_a_multiplet_appears() {
        // Measured behaviour, recorded: the intra-set diagonal placement is not
        // a solution even without any fermions.
        let s = spec(2, 0, &[2, 1], cx(0.7, 0.25), LiftConvention::Diagonal);
        let res = check_ybe(&s, cx(0.3, 0.1), cx(-0.2, 0.4), cx(0.05, -0.3), LiftConvention::Diagonal).unwrap();
        assert!(res > 1e-3, "residual {res}");
        // and coincides with the Exchange lift when all n_I = 1
        let s = spec(2, 1, &[1, 1, 1], cx(0.7, 0.25), LiftConvention::Diagonal);
        let res = check_ybe(&s, cx(0.3, 0.1), cx(-0.2, 0.4), cx(0.05, -0.3), LiftConvention::Diagonal).unwrap();
        assert!(res < 1e-12);
    }

    #[test]
    fn corrupted_r_fails_ybe() {
        let s = spec(1, 1, &[1, 1], cx(0.7, 0.25), LiftConvention::Exchange);
        let res = check_ybe_with(&s, cx(0.3, 0.1), cx(-0.2, 0.4), cx(0.05, -0.3), |x| {
            let mut r = build_r_lifted(&s, x)?;
            r.add_at(1, 1, cx(1e-3, 0.0));
            Ok(r)
        })
        .unwrap();
        assert!(res > 1e-6);
    }

    #[test]
    fn form_constraint_examples() {
        let s = spec(1, 1, &[2, 1], cx(0.7, 0.25), LiftConvention::Exchange);
        assert!(check_form_constraint(&build_r_lifted(&s, cx(0.2, 0.3)).unwrap(), &s));
        assert!(check_form_constraint(&SpectralOperator::identity(vec![3, 3]), &s));
        let ones = SpectralOperator::from_fn(vec![3, 3], |_, _| ONE);
        assert!(!check_form_constraint(&ones, &s));
    }

    fn random_model(rng: &mut ChaCha8Rng) -> ModelSpec {
        let k = rng.random_range(2..4usize);
        let m = rng.random_range(0..=k);
        let mult = (0..k).map(|_| rng.random_range(1..4usize)).collect();
        let q = cx(rng.random_range(0.3..1.6), rng.random_range(-0.6..0.6));
        ModelSpec::new(m, k - m, mult, q, LiftConvention::Exchange).unwrap()
    }

    proptest! {
        #[test]
        fn weight_identities(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_model(&mut rng);
            let lam = cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if let Ok(w) = BoltzmannWeights::at(&s, lam) {
                let x = (lam * 2.0).exp();
                let q2 = s.q() * s.q();
                for i in 0..s.base_count() {
                    if s.base_grade(i) == 0 {
                        prop_assert!((w.a[i] - ONE).norm() < 1e-12);
                    } else {
                        prop_assert!((w.a[i] * (q2 - x) - (ONE - q2 * x)).norm() < 1e-12);
                    }
                }
                prop_assert!((w.c - w.d * x).norm() < 1e-12 * (1.0 + w.c.norm()));
            }
        }

        #[test]
        fn lifted_r_respects_form_constraint(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_model(&mut rng);
            if rng.random_bool(0.5) {
                s = s.with_convention(LiftConvention::Diagonal);
            }
            let lam = cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if let Ok(r) = build_r_lifted(&s, lam) {
                prop_assert!(check_form_constraint(&r, &s));
            }
        }

        #[test]
        fn deleting_labels_recovers_base_r(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_model(&mut rng);
            let lam = cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (Ok(lifted), Ok(base)) = (build_r_lifted(&s, lam), build_r_base(&s, lam)) else {
                return Ok(());
            };
            // keep one random label per multiplet
            let keep: Vec<usize> = s.multiplicities().iter().enumerate()
                .map(|(i, &k)| StateIndex::new(i, rng.random_range(0..k)).flatten(&s).unwrap())
                .collect();
            let n = s.dim();
            let nb = s.base_count();
            for r in 0..nb * nb {
                for c in 0..nb * nb {
                    let big_r = keep[r / nb] * n + keep[r % nb];
                    let big_c = keep[c / nb] * n + keep[c % nb];
                    prop_assert_eq!(lifted.get(big_r, big_c), base.get(r, c));
                }
            }
            prop_assert_eq!(enumerate_states(&s).len(), n);
        }

        #[test]
        fn all_singletons_coincide_with_base(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_model(&mut rng).base_model();
            let lam = cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if let Ok(base) = build_r_base(&s, lam) {
                for lc in [LiftConvention::Exchange, LiftConvention::Diagonal] {
                    prop_assert_eq!(&build_r_lifted(&s.with_convention(lc), lam).unwrap(), &base);
                }
            }
        }
    }
}
