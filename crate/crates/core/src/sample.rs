//! Seeded random generators for problems, colligations, commuting tuples and
//! polynomials. Everything takes an explicit RNG so callers control determinism.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::disc::{DiscAutomorphism, DiscPoint, ONE, ZERO};
use crate::matrix::{commutation_residual, CMatrix, MatrixTuple};
use crate::pick::PickProblem;
use crate::poly::MultiPoly;
use crate::realization::{tf_eval_point, Colligation};

pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * std::f64::consts::FRAC_1_SQRT_2
}

/// Uniform on the disc of the given radius.
pub fn disc_point(rng: &mut impl Rng, radius: f64) -> Complex64 {
    Complex64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU))
}

/// Uniform on the closed polydisc of the given radius.
pub fn polydisc_point(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<Complex64> {
    (0..d).map(|_| disc_point(rng, radius)).collect()
}

/// Uniform on the torus of the given radius.
pub fn torus_point(rng: &mut impl Rng, d: usize, radius: f64) -> Vec<Complex64> {
    (0..d).map(|_| Complex64::from_polar(radius, rng.random_range(0.0..std::f64::consts::TAU))).collect()
}

pub fn automorphism(rng: &mut impl Rng, radius: f64) -> DiscAutomorphism {
    let rotation = Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU));
    DiscAutomorphism::new(rotation, DiscPoint::new(disc_point(rng, radius)).expect("inside the disc"))
        .expect("unimodular rotation")
}

/// Nodes and targets drawn independently; may or may not be solvable.
pub fn problem(rng: &mut impl Rng, d: usize, radius: f64) -> PickProblem {
    loop {
        let nodes = [(); 3].map(|_| polydisc_point(rng, d, radius));
        let targets = [(); 3].map(|_| disc_point(rng, radius));
        if let Ok(p) = PickProblem::new(nodes, targets) {
            return p;
        }
    }
}

/// Haar-random unitary (QR of a Gaussian matrix with the phases of `R` removed).
pub fn unitary(rng: &mut impl Rng, m: usize) -> CMatrix {
    let qr = CMatrix::from_fn(m, m, |_, _| gaussian(rng)).qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DVector::from_iterator(
        m,
        (0..m).map(|i| if r[(i, i)].norm() > 0.0 { r[(i, i)] / r[(i, i)].norm() } else { ONE }),
    );
    q * DMatrix::from_diagonal(&phases)
}

pub fn colligation(rng: &mut impl Rng, partition: Vec<usize>) -> Colligation {
    let r: usize = partition.iter().sum();
    Colligation::new(partition, unitary(rng, r + 1)).expect("Haar unitary")
}

/// A solvable problem: targets are `ρ·f(nodes)` for a random colligation
/// `f` with at most two states per variable and `ρ ∈ [0.5, 0.999]`.
pub fn feasible_problem(rng: &mut impl Rng, d: usize) -> PickProblem {
    loop {
        let mut partition: Vec<usize> = (0..d).map(|_| rng.random_range(0..=2)).collect();
        if partition.iter().all(|&k| k == 0) {
            partition[rng.random_range(0..d)] = 1;
        }
        let f = colligation(rng, partition);
        let rho = rng.random_range(0.5..0.999);
        let nodes = [(); 3].map(|_| polydisc_point(rng, d, 0.9));
        let targets = nodes.clone().map(|z| tf_eval_point(&f, &z).expect("interior point") * rho);
        if let Ok(p) = PickProblem::new(nodes, targets) {
            return p;
        }
    }
}

/// A degenerate problem solved by the coordinate function `z ↦ z_j`: nodes
/// `0, w, v` and targets `0, w_j, v_j`, where `|w_j|` beats every other
/// coordinate of `w` by at least 0.05.
pub fn coordinate_problem(rng: &mut impl Rng, d: usize) -> (PickProblem, usize) {
    loop {
        let j = rng.random_range(0..d);
        let mut w = polydisc_point(rng, d, 0.85);
        let lead = Complex64::from_polar(rng.random_range(0.3..0.9), rng.random_range(0.0..std::f64::consts::TAU));
        w[j] = lead;
        for (k, x) in w.iter_mut().enumerate() {
            if k != j && x.norm() > lead.norm() - 0.05 {
                *x *= (lead.norm() - 0.05).max(0.0) / x.norm();
            }
        }
        let v = polydisc_point(rng, d, 0.9);
        let targets = [ZERO, w[j], v[j]];
        if let Ok(p) = PickProblem::new([vec![ZERO; d], w, v], targets) {
            return (p, j);
        }
    }
}

/// Moves nodes by per-coordinate automorphisms and targets by `target_map`.
pub fn conjugate(
    problem: &PickProblem,
    node_maps: &[DiscAutomorphism],
    target_map: &DiscAutomorphism,
) -> crate::error::Result<PickProblem> {
    let nodes = problem.nodes().clone().map(|z| z.iter().zip(node_maps).map(|(x, m)| m.eval(*x)).collect());
    PickProblem::new(nodes, problem.targets().map(|t| target_map.eval(t)))
}

/// Random polynomial of total degree ≤ `degree` with Gaussian coefficients on
/// every monomial; never zero.
pub fn poly(rng: &mut impl Rng, d: usize, degree: u32) -> MultiPoly {
    let mut exps = vec![vec![0u32; d]];
    for _ in 0..degree {
        let mut next = exps.clone();
        for e in &exps {
            for j in 0..d {
                let mut f = e.clone();
                f[j] += 1;
                if f.iter().sum::<u32>() <= degree {
                    next.push(f);
                }
            }
        }
        next.sort();
        next.dedup();
        exps = next;
    }
    loop {
        let mut terms = Vec::new();
        for e in &exps {
            if rng.random_bool(0.7) {
                terms.push((e.clone(), gaussian(rng)));
            }
        }
        let p = MultiPoly::new(d, terms).expect("consistent exponents");
        if !p.is_zero() {
            return p;
        }
    }
}

/// Rescales so the largest norm is `radius`.
pub fn scale_to(t: &MatrixTuple, radius: f64) -> MatrixTuple {
    let norm = t.max_norm();
    if norm == 0.0 {
        return t.clone();
    }
    let factor = Complex64::new(radius / norm, 0.0);
    MatrixTuple::new(t.matrices().iter().map(|m| m * factor).collect()).expect("same shapes")
}

/// Family (i): `T_m = q_m(M)` for one Gaussian matrix `M` and random
/// quadratics `q_m`, scaled to norm `radius`.
pub fn polynomial_family(rng: &mut impl Rng, n: usize, d: usize, radius: f64) -> MatrixTuple {
    let m = CMatrix::from_fn(n, n, |_, _| gaussian(rng)) / Complex64::new((n as f64).sqrt(), 0.0);
    let m2 = &m * &m;
    let ms = (0..d)
        .map(|_| CMatrix::identity(n, n) * (gaussian(rng) * 0.3) + &m * gaussian(rng) + &m2 * (gaussian(rng) * 0.5))
        .collect();
    scale_to(&MatrixTuple::new(ms).expect("same shapes"), radius)
}

/// Family (ii): simultaneously upper-triangular tuples. The first matrix has
/// a repeated diagonal so its commutant is large; each further matrix is a
/// random element of the joint upper-triangular commutant of the previous
/// ones, found as the null space of the commutator equations.
/// Returns `None` when the draw fails to commute to `1e-10`.
pub fn triangular_family(rng: &mut impl Rng, n: usize, d: usize, radius: f64) -> Option<MatrixTuple> {
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values = [gaussian(rng) * 0.5, gaussian(rng) * 0.5];
    let first = CMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => values[usize::from(rng.random_bool(0.3) && i > 0)],
        std::cmp::Ordering::Less => gaussian(rng),
        std::cmp::Ordering::Greater => ZERO,
    });
    let mut ms = vec![first];
    while ms.len() < d {
        // rows: entries of [T, X] for each previous T; columns: free entries of X
        let mut rows = CMatrix::zeros(ms.len() * n * n, slots.len());
        for (k, t) in ms.iter().enumerate() {
            for (col, &(a, b)) in slots.iter().enumerate() {
                // [T, E_ab] = T E_ab − E_ab T
                for i in 0..n {
                    rows[(k * n * n + i * n + b, col)] += t[(i, a)];
                }
                for j in 0..n {
                    rows[(k * n * n + a * n + j, col)] -= t[(b, j)];
                }
            }
        }
        let svd = rows.svd(false, true);
        let vt = svd.v_t?;
        let top = svd.singular_values.max().max(1.0);
        let mut x = DVector::<Complex64>::zeros(slots.len());
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s <= 1e-10 * top {
                x += vt.row(i).adjoint() * gaussian(rng);
            }
        }
        let mut m = CMatrix::zeros(n, n);
        for (col, &(a, b)) in slots.iter().enumerate() {
            m[(a, b)] = x[col];
        }
        ms.push(m);
    }
    let t = MatrixTuple::new(ms).ok()?;
    let scaled = scale_to(&t, radius);
    (commutation_residual(&scaled) <= 1e-10).then_some(scaled)
}

/// `(λ_1 N, …, λ_d N)` with `N` the `n×n` Jordan nilpotent and `λ` random.
pub fn jordan_family(rng: &mut impl Rng, n: usize, d: usize, radius: f64) -> MatrixTuple {
    let nil = CMatrix::from_fn(n, n, |i, j| if j == i + 1 { ONE } else { ZERO });
    let ms = (0..d).map(|_| &nil * gaussian(rng)).collect();
    scale_to(&MatrixTuple::new(ms).expect("same shapes"), radius)
}

/// `S·diag(λ_m)·S⁻¹` with a random well-conditioned `S`, scaled to norm `radius`.
pub fn diagonalizable_family(rng: &mut impl Rng, n: usize, d: usize, radius: f64) -> MatrixTuple {
    let s = CMatrix::identity(n, n) + CMatrix::from_fn(n, n, |_, _| gaussian(rng) * 0.3);
    let s_inv = s.clone().try_inverse().expect("a perturbed identity is invertible almost surely");
    let ms = (0..d)
        .map(|_| {
            let diag = DVector::from_iterator(n, (0..n).map(|_| disc_point(rng, 1.0)));
            &s * DMatrix::from_diagonal(&diag) * &s_inv
        })
        .collect();
    scale_to(&MatrixTuple::new(ms).expect("same shapes"), radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agler::{feasibility, FEAS_TOL, MAX_ITER};
    use crate::matrix::operator_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for m in 1..6 {
            let u = unitary(&mut rng, m);
            assert!(operator_norm(&(u.adjoint() * &u - CMatrix::identity(m, m))) < 1e-13);
        }
    }

    #[test]
    fn feasible_problems_are_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=3 {
            for _ in 0..5 {
                assert!(feasibility(&feasible_problem(&mut rng, d), FEAS_TOL, MAX_ITER).is_feasible());
            }
        }
    }

    #[test]
    fn families_commute_and_are_strict() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=4 {
            for d in 1..=4 {
                let fam = [
                    Some(polynomial_family(&mut rng, n, d, 0.9)),
                    triangular_family(&mut rng, n, d, 0.9),
                    Some(jordan_family(&mut rng, n, d, 0.9)),
                    Some(diagonalizable_family(&mut rng, n, d, 0.9)),
                ];
                for t in fam.into_iter().flatten() {
                    assert!(commutation_residual(&t) <= 1e-10, "n={n} d={d}");
                    assert!(t.max_norm() <= 0.9 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn triangular_family_goes_beyond_polynomials() {
        // with a repeated eigenvalue the second matrix need not be a polynomial in the first
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let drawn = (0..20).filter_map(|_| triangular_family(&mut rng, 3, 3, 0.9)).count();
        assert!(drawn >= 15);
    }

    #[test]
    fn polys_respect_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for deg in 0..5 {
            let p = poly(&mut rng, 3, deg);
            assert!(p.total_degree() <= deg && !p.is_zero());
        }
    }
}
