//! Transfer-function realizations of Agler certificates.
//!
//! Writing `conj(Γⁿ) = Bₙ*Bₙ` and `x_j = ⊕ₙ Bₙ e_j`, the certificate identity
//! says that the Gram matrices of `Z_j x_j ⊕ 1` and `x_j ⊕ t_j` agree, where
//! `Z_j` scales the `n`-th block by `z_jⁿ`. Any unitary `U` carrying the first
//! family onto the second is a colligation whose transfer function
//! `f(z) = D + C·Z(z)·(I − A·Z(z))⁻¹·B` interpolates the data.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agler::{reduce_rank, residual, AglerCertificate, FEAS_TOL};
use crate::disc::{ONE, ZERO};
use crate::error::{Error, Result};
use crate::matrix::{from_row_major, hermitian_eigen, max_abs, operator_norm, row_major, CMatrix, MatrixTuple};
use crate::pick::PickProblem;

/// Eigenvalues at or below this are treated as zero when factoring blocks.
pub const RANK_TOL: f64 = 1e-9;
pub const UNITARY_TOL: f64 = 1e-10;
pub const INTERP_TOL: f64 = 1e-8;
/// Radius used for boundary limits and torus sampling.
pub const BOUNDARY_RADIUS: f64 = 1.0 - 1e-8;
const SINGULAR_RADIUS: f64 = 1.0 - 1e-9;
const STRICT_MARGIN: f64 = 1e-9;

/// A unitary `(r+1)×(r+1)` matrix `[[A, B], [C, D]]` with the state space
/// split into one block per variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Colligation {
    r: usize,
    partition: Vec<usize>,
    u: CMatrix,
}

impl Colligation {
    pub fn new(partition: Vec<usize>, u: CMatrix) -> Result<Self> {
        let r: usize = partition.iter().sum();
        if partition.is_empty() {
            return Err(Error::Input("partition needs at least one variable".into()));
        }
        if u.shape() != (r + 1, r + 1) {
            return Err(Error::Input(format!("U is {}×{}, expected {}×{}", u.nrows(), u.ncols(), r + 1, r + 1)));
        }
        let defect = unitary_defect(&u);
        if defect > UNITARY_TOL {
            return Err(Error::Input(format!("U is not unitary (‖U*U − I‖ = {defect:e})")));
        }
        Ok(Self { r, partition, u })
    }

    /// `f ≡ z_j` on `d` variables.
    pub fn coordinate(d: usize, j: usize) -> Result<Self> {
        if j >= d {
            return Err(Error::Input(format!("coordinate {j} out of range for d = {d}")));
        }
        let mut partition = vec![0; d];
        partition[j] = 1;
        let u = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        Self::new(partition, u)
    }

    /// `f ≡ value` on `d` variables, `|value| = 1` being the only unitary choice.
    pub fn constant(d: usize, value: Complex64) -> Result<Self> {
        Self::new(vec![0; d], CMatrix::from_element(1, 1, value))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn d(&self) -> usize {
        self.partition.len()
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    pub fn u(&self) -> &CMatrix {
        &self.u
    }

    pub fn a(&self) -> CMatrix {
        self.u.view((0, 0), (self.r, self.r)).into_owned()
    }

    pub fn b(&self) -> CMatrix {
        self.u.view((0, self.r), (self.r, 1)).into_owned()
    }

    pub fn c(&self) -> CMatrix {
        self.u.view((self.r, 0), (1, self.r)).into_owned()
    }

    pub fn d_entry(&self) -> Complex64 {
        self.u[(self.r, self.r)]
    }

    pub fn unitary_defect(&self) -> f64 {
        unitary_defect(&self.u)
    }

    /// Variable index of each state coordinate.
    fn slots(&self) -> Vec<usize> {
        self.partition.iter().enumerate().flat_map(|(n, &k)| std::iter::repeat_n(n, k)).collect()
    }

    pub fn to_json(&self) -> ColligationJson {
        ColligationJson { r: self.r, partition: self.partition.clone(), u: row_major(&self.u) }
    }

    pub fn from_json(json: &ColligationJson) -> Result<Self> {
        let col = Self::new(json.partition.clone(), from_row_major(json.r + 1, &json.u)?)?;
        if col.r != json.r {
            return Err(Error::Input(format!("declared r = {} but the partition sums to {}", json.r, col.r)));
        }
        Ok(col)
    }
}

/// `{"r": int, "partition": [int,...], "U": [[re,im],...]}`, `U` row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColligationJson {
    pub r: usize,
    pub partition: Vec<usize>,
    #[serde(rename = "U")]
    pub u: Vec<Complex64>,
}

fn unitary_defect(u: &CMatrix) -> f64 {
    operator_norm(&(u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols())))
}

/// Rows of `B` with `conj(Γ) = B*B`, dropping eigenvalues `≤ keep_above`.
/// Eigenvector phases are fixed so the largest component is real positive.
fn factor(gamma: &CMatrix, keep_above: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(&gamma.map(|z| z.conj()));
    let keep: Vec<usize> = (0..3).rev().filter(|&i| values[i] > keep_above).collect();
    CMatrix::from_fn(keep.len(), 3, |row, col| {
        let i = keep[row];
        let v = vectors.column(i);
        let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ONE);
        let phase = if pivot.norm() > 0.0 { pivot.conj() / pivot.norm() } else { ONE };
        (v[col] * phase).conj() * values[i].sqrt()
    })
}

fn clipped_positive(gamma: &CMatrix) -> bool {
    hermitian_eigen(&gamma.map(|z| z.conj())).0.iter().any(|&v| v > 0.0 && v <= RANK_TOL)
}

/// Realizes a certificate as a unitary colligation.
pub fn build_colligation(cert: &AglerCertificate, problem: &PickProblem) -> Result<Colligation> {
    let (res, min_eig) = residual(cert, problem)?;
    let scale = 1.0 + cert.gammas.iter().map(max_abs).fold(0.0, f64::max);
    if res > 10.0 * FEAS_TOL * scale || min_eig < -10.0 * FEAS_TOL * scale {
        return Err(Error::InconsistentCertificate { residual: res.max(-min_eig) });
    }
    // a low-rank certificate gives a small state space and, in practice, a
    // function whose boundary modulus stays much closer to 1
    if let Ok(col) = reduce_rank(cert, problem, RANK_TOL).and_then(|c| realize(&c, problem, RANK_TOL)) {
        return Ok(col);
    }
    match realize(cert, problem, RANK_TOL) {
        Ok(col) => Ok(col),
        Err(first) => {
            // keeping the clipped eigenvalues is the only other reasonable rank choice
            let Some(block) = cert.gammas.iter().position(clipped_positive) else { return Err(first) };
            realize(cert, problem, 0.0).map_err(|_| {
                let eig = hermitian_eigen(&cert.gammas[block]).0;
                let low = eig.iter().filter(|&&v| v > RANK_TOL).count();
                let high = eig.iter().filter(|&&v| v > 0.0).count();
                Error::RankAmbiguity { block, low, high }
            })
        }
    }
}

fn realize(cert: &AglerCertificate, problem: &PickProblem, keep_above: f64) -> Result<Colligation> {
    let factors: Vec<CMatrix> = cert.gammas.iter().map(|g| factor(g, keep_above)).collect();
    let partition: Vec<usize> = factors.iter().map(|b| b.nrows()).collect();
    let r: usize = partition.iter().sum();
    let nodes = problem.nodes();
    let targets = problem.targets();
    // columns j: left = Z_j x_j ⊕ 1, right = x_j ⊕ t_j
    let mut left = CMatrix::zeros(r + 1, 3);
    let mut right = CMatrix::zeros(r + 1, 3);
    for j in 0..3 {
        let mut offset = 0;
        for (n, b) in factors.iter().enumerate() {
            for row in 0..b.nrows() {
                right[(offset + row, j)] = b[(row, j)];
                left[(offset + row, j)] = b[(row, j)] * nodes[j][n];
            }
            offset += b.nrows();
        }
        left[(r, j)] = ONE;
        right[(r, j)] = targets[j];
    }
    let gram = max_abs(&(left.adjoint() * &left - right.adjoint() * &right));
    if gram > 10.0 * FEAS_TOL * (1.0 + max_abs(&(left.adjoint() * &left))) {
        return Err(Error::InconsistentCertificate { residual: gram });
    }
    // closest unitary carrying left onto right: polar factor of right·left*
    let svd = (&right * left.adjoint()).svd(true, true);
    let (Some(p), Some(qh)) = (svd.u, svd.v_t) else {
        return Err(Error::Internal("SVD did not return singular vectors".into()));
    };
    let col = Colligation::new(partition, p * qh)?;
    for j in 0..3 {
        let miss = (tf_eval_point(&col, &nodes[j])? - targets[j]).norm();
        if miss > INTERP_TOL {
            return Err(Error::InconsistentCertificate { residual: miss });
        }
    }
    Ok(col)
}

fn state_diagonal(col: &Colligation, z: &[Complex64]) -> DVector<Complex64> {
    DVector::from_iterator(col.r, col.slots().into_iter().map(|n| z[n]))
}

fn resolve(col: &Colligation, z: &[Complex64]) -> Option<Complex64> {
    if col.r == 0 {
        return Some(col.d_entry());
    }
    let zd = state_diagonal(col, z);
    let a = col.a();
    let mut m = CMatrix::identity(col.r, col.r);
    for i in 0..col.r {
        for k in 0..col.r {
            m[(i, k)] -= a[(i, k)] * zd[k];
        }
    }
    let x = m.lu().solve(&col.b())?;
    let value = col.d_entry() + (0..col.r).map(|k| col.u[(col.r, k)] * zd[k] * x[(k, 0)]).sum::<Complex64>();
    value.is_finite().then_some(value)
}

/// Evaluates the transfer function on the closed polydisc. Points with a
/// coordinate on the circle whose resolvent is singular are evaluated as
/// the limit from radius `1 − 1e−9`.
pub fn tf_eval_point(col: &Colligation, z: &[Complex64]) -> Result<Complex64> {
    if z.len() != col.d() {
        return Err(Error::Input(format!("point has {} coordinates, colligation has {}", z.len(), col.d())));
    }
    if let Some(bad) = z.iter().find(|w| !(w.norm() <= 1.0 + 1e-15)) {
        return Err(Error::Domain { modulus: bad.norm(), margin: 0.0 });
    }
    let on_boundary = z.iter().any(|w| w.norm() >= SINGULAR_RADIUS);
    match resolve(col, z) {
        Some(v) if !on_boundary || v.norm() <= 1.0 + 1e-6 => Ok(v),
        _ if on_boundary => {
            let pulled: Vec<Complex64> =
                z.iter().map(|w| if w.norm() > SINGULAR_RADIUS { w * (SINGULAR_RADIUS / w.norm()) } else { *w }).collect();
            resolve(col, &pulled).filter(|v| v.norm() <= 1.0 + 1e-6).ok_or(Error::BoundarySingularity)
        }
        _ => Err(Error::Internal("singular resolvent inside the polydisc".into())),
    }
}

/// `f(T)` for a commuting tuple of strict contractions.
pub fn tf_eval_tuple(col: &Colligation, t: &MatrixTuple) -> Result<CMatrix> {
    if t.d() != col.d() {
        return Err(Error::Input(format!("tuple has {} matrices, colligation has {} variables", t.d(), col.d())));
    }
    t.require_commuting()?;
    for (n, m) in t.matrices().iter().enumerate() {
        let norm = operator_norm(m);
        if norm > 1.0 - STRICT_MARGIN {
            return Err(Error::Precondition(format!("T_{n} has norm {norm}, not a strict contraction")));
        }
    }
    let size = t.n();
    let identity = CMatrix::identity(size, size);
    if col.r == 0 {
        return Ok(identity * col.d_entry());
    }
    let slots = col.slots();
    let dim = col.r * size;
    let a = col.a();
    // (A⊗I)·Z(T): block (i, k) is A_ik·T_{slot k}
    let mut m = CMatrix::identity(dim, dim);
    for i in 0..col.r {
        for k in 0..col.r {
            let block = &t.matrices()[slots[k]] * a[(i, k)];
            let mut view = m.view_mut((i * size, k * size), (size, size));
            view -= block;
        }
    }
    let mut rhs = CMatrix::zeros(dim, size);
    for i in 0..col.r {
        rhs.view_mut((i * size, 0), (size, size)).copy_from(&(&identity * col.u[(i, col.r)]));
    }
    let x = m.lu().solve(&rhs).ok_or_else(|| Error::Internal("singular resolvent for a strict contraction".into()))?;
    let mut out = &identity * col.d_entry();
    for k in 0..col.r {
        out += &t.matrices()[slots[k]] * x.view((k * size, 0), (size, size)) * col.u[(col.r, k)];
    }
    Ok(out)
}

/// Extremes of `|f|` over random points of the torus pulled to radius `1 − 1e−8`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerCheck {
    pub min_boundary_mod: f64,
    pub max_boundary_mod: f64,
    /// Samples where the resolvent was singular; these are skipped.
    pub singular: usize,
}

pub fn inner_check(col: &Colligation, samples: usize, seed: u64) -> InnerCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = InnerCheck { min_boundary_mod: f64::INFINITY, max_boundary_mod: 0.0, singular: 0 };
    for _ in 0..samples {
        let z: Vec<Complex64> = (0..col.d())
            .map(|_| Complex64::from_polar(BOUNDARY_RADIUS, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        match resolve(col, &z) {
            Some(v) => {
                out.min_boundary_mod = out.min_boundary_mod.min(v.norm());
                out.max_boundary_mod = out.max_boundary_mod.max(v.norm());
            }
            None => out.singular += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agler::{feasibility, MAX_ITER};
    use crate::sample;
    use crate::pick::gradient_at_zero;
    use crate::poly::{eval_tuple, MultiPoly};
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ones() -> CMatrix {
        CMatrix::from_element(3, 3, ONE)
    }

    fn random_colligation(rng: &mut impl Rng, partition: Vec<usize>) -> Colligation {
        sample::colligation(rng, partition)
    }

    fn random_point(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<Complex64> {
        sample::polydisc_point(rng, d, radius)
    }

    fn random_commuting(rng: &mut impl Rng, n: usize, d: usize) -> MatrixTuple {
        sample::polynomial_family(rng, n, d, 0.95)
    }

    fn realized(seed: u64, d: usize) -> Option<(PickProblem, Colligation)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = sample::feasible_problem(&mut rng, d);
        let cert = feasibility(&p, FEAS_TOL, MAX_ITER).status;
        let crate::agler::FeasibilityStatus::Feasible(cert) = cert else { return None };
        Some((p.clone(), build_colligation(&cert, &p).unwrap()))
    }

    #[test]
    fn shift_and_coordinate_realizations() {
        let p = PickProblem::real([&[0.0], &[0.5], &[-0.3]], [0.0, 0.5, -0.3]).unwrap();
        let cert = AglerCertificate::new(vec![ones()], &p).unwrap();
        let col = build_colligation(&cert, &p).unwrap();
        assert_eq!(col.r(), 1);
        assert!(max_abs(&(col.u() - CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))) < 1e-12);
        assert!((tf_eval_point(&col, &[c(0.2, 0.3)]).unwrap() - c(0.2, 0.3)).norm() < 1e-12);

        let p2 = PickProblem::real([&[0.0, 0.1], &[0.5, -0.2], &[0.3, 0.7]], [0.0, 0.5, 0.3]).unwrap();
        let cert = AglerCertificate::new(vec![ones(), CMatrix::zeros(3, 3)], &p2).unwrap();
        let col = build_colligation(&cert, &p2).unwrap();
        assert_eq!(col.partition(), &[1, 0]);
        let z = [c(-0.4, 0.1), c(0.9, 0.0)];
        assert!((tf_eval_point(&col, &z).unwrap() - z[0]).norm() < 1e-12);
    }

    #[test]
    fn point_evaluation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let col = random_colligation(&mut rng, vec![2, 1]);
        assert!((tf_eval_point(&col, &[ZERO, ZERO]).unwrap() - col.d_entry()).norm() < 1e-15);
        let coord = Colligation::coordinate(3, 1).unwrap();
        let z = [c(0.1, 0.0), c(-0.3, 0.6), c(0.0, 1.0)];
        assert!((tf_eval_point(&coord, &z).unwrap() - z[1]).norm() < 1e-15);
        assert!(matches!(tf_eval_point(&coord, &[c(1.1, 0.0), ZERO, ZERO]), Err(Error::Domain { .. })));
        for _ in 0..10_000 {
            let z = random_point(&mut rng, 2, 1.0);
            assert!(tf_eval_point(&col, &z).unwrap().norm() <= 1.0 + 1e-10);
        }
    }

    #[test]
    fn tuple_evaluation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_commuting(&mut rng, 3, 2);
        let coord = Colligation::coordinate(2, 0).unwrap();
        assert!(max_abs(&(tf_eval_tuple(&coord, &t).unwrap() - &t.matrices()[0])) < 1e-14);
        let constant = Colligation::constant(2, c(0.6, 0.8)).unwrap();
        assert_eq!(tf_eval_tuple(&constant, &t).unwrap(), CMatrix::identity(3, 3) * c(0.6, 0.8));
        let unit = MatrixTuple::new(vec![CMatrix::identity(2, 2), CMatrix::zeros(2, 2)]).unwrap();
        assert!(matches!(tf_eval_tuple(&coord, &unit), Err(Error::Precondition(_))));
        for n in [2, 3, 4] {
            for _ in 0..20 {
                let col = random_colligation(&mut rng, vec![2, 2]);
                let t = random_commuting(&mut rng, n, 2);
                assert!(operator_norm(&tf_eval_tuple(&col, &t).unwrap()) <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn nilpotent_colligation_matches_polynomial() {
        // A = [[0,0],[1,0]], B = [1,0]ᵀ, C = [0,1], D = 0: f = z₁·z₂
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shift = Colligation::new(
            vec![1, 1],
            CMatrix::from_row_slice(3, 3, &[ZERO, ZERO, ONE, ONE, ZERO, ZERO, ZERO, ONE, ZERO]),
        )
        .unwrap();
        let p = MultiPoly::new(2, [(vec![1, 1], ONE)]).unwrap();
        for n in [2, 3] {
            let t = random_commuting(&mut rng, n, 2);
            let lhs = tf_eval_tuple(&shift, &t).unwrap();
            assert!(max_abs(&(lhs - eval_tuple(&p, &t).unwrap())) < 1e-8);
        }
    }

    #[test]
    fn random_problems_are_realized() {
        let mut checked = 0;
        for seed in 0..24u64 {
            let d = 1 + (seed % 4) as usize;
            let Some((p, col)) = realized(seed, d) else { continue };
            checked += 1;
            assert!(col.unitary_defect() <= UNITARY_TOL);
            for j in 0..3 {
                assert!((tf_eval_point(&col, &p.nodes()[j]).unwrap() - p.targets()[j]).norm() < INTERP_TOL);
            }
            let audit = inner_check(&col, 2000, seed);
            assert!(audit.min_boundary_mod >= 1.0 - 1e-4, "{audit:?}");
            assert!(audit.max_boundary_mod <= 1.0 + 1e-10);
        }
        assert_eq!(checked, 24);
    }

    #[test]
    fn normalized_solutions_satisfy_gradient_bound() {
        for seed in 100..112u64 {
            let d = 2 + (seed % 3) as usize;
            let Some((p, _)) = realized(seed, d) else { continue };
            let (q, _) = crate::pick::normalize(&p);
            let cert = feasibility(&q, FEAS_TOL, MAX_ITER);
            let Some(cert) = cert.certificate() else { continue };
            let col_q = build_colligation(cert, &q).unwrap();
            assert!(tf_eval_point(&col_q, &vec![ZERO; d]).unwrap().norm() < 1e-8);
            let grad = gradient_at_zero(|z| tf_eval_point(&col_q, z), d, 1e-5).unwrap();
            assert!(grad.iter().map(|g| g.norm()).sum::<f64>() <= 1.0 + 1e-5);
        }
    }

    #[test]
    fn inner_check_of_coordinate_is_one() {
        let audit = inner_check(&Colligation::coordinate(2, 0).unwrap(), 500, 1);
        assert!((audit.min_boundary_mod - 1.0).abs() <= 1e-8 + 1e-15 && (audit.max_boundary_mod - 1.0).abs() <= 1e-8 + 1e-15);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let col = random_colligation(&mut rng, vec![1, 0, 2]);
        let text = serde_json::to_string(&col.to_json()).unwrap();
        assert!(text.contains("\"U\""));
        let back = Colligation::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, col);
        let mut bad = col.to_json();
        bad.u[0] *= 2.0;
        assert!(Colligation::from_json(&bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn random_colligations_are_contractive(seed in any::<u64>(), r1 in 0usize..3, r2 in 0usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let col = random_colligation(&mut rng, vec![r1, r2]);
            for _ in 0..200 {
                let z = random_point(&mut rng, 2, 1.0);
                prop_assert!(tf_eval_point(&col, &z).unwrap().norm() <= 1.0 + 1e-10);
            }
            let t = random_commuting(&mut rng, 3, 2);
            prop_assert!(operator_norm(&tf_eval_tuple(&col, &t).unwrap()) <= 1.0 + 1e-9);
        }
    }
}
