//! Small dense complex matrices and commuting tuples.
//!
//! Joint eigenvalues are read off the diagonals of a simultaneous Schur form:
//! a random linear combination `M = Σ c_m T_m` is Schur-factorized and every
//! matrix of the tuple is conjugated by the same unitary. When `M` is
//! non-derogatory this triangularizes the whole commutant, and because all
//! matrices share one Schur ordering the joint eigenvalues stay paired.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::disc::{ONE, ZERO};
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues of the generic combination closer than this are treated as tied.
pub const EIG_GAP_TOL: f64 = 1e-7;
/// Random combinations drawn before giving up.
pub const MAX_RETRIES: usize = 8;
/// Allowed strictly-lower mass after triangularization, relative to the largest norm.
pub const TRIANGULAR_TOL: f64 = 1e-8;

/// `d` square matrices of a common size `n`, with the tolerance used to call them commuting.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixTuple {
    matrices: Vec<CMatrix>,
    comm_tol: f64,
}

impl MatrixTuple {
    /// Builds a tuple with the default commutation tolerance
    /// `1e-10 · (1 + max‖T_m‖²)`. Commutation itself is not enforced here;
    /// see [`MatrixTuple::require_commuting`].
    pub fn new(matrices: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::Input("a tuple needs at least one matrix".into()));
        };
        let n = first.nrows();
        for (m, t) in matrices.iter().enumerate() {
            if t.nrows() != n || t.ncols() != n {
                return Err(Error::Input(format!(
                    "matrix {m} is {}x{}, expected {n}x{n}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            if t.iter().any(|z| !z.is_finite()) {
                return Err(Error::Input(format!("matrix {m} has non-finite entries")));
            }
        }
        let comm_tol = default_comm_tol(&matrices);
        Ok(Self { matrices, comm_tol })
    }

    pub fn with_comm_tol(mut self, comm_tol: f64) -> Self {
        self.comm_tol = comm_tol;
        self
    }

    pub fn n(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn d(&self) -> usize {
        self.matrices.len()
    }

    pub fn comm_tol(&self) -> f64 {
        self.comm_tol
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn into_matrices(self) -> Vec<CMatrix> {
        self.matrices
    }

    pub fn max_norm(&self) -> f64 {
        self.matrices.iter().map(operator_norm).fold(0.0, f64::max)
    }

    pub fn is_commuting(&self) -> bool {
        commutation_residual(self) <= self.comm_tol
    }

    pub fn require_commuting(&self) -> Result<()> {
        let residual = commutation_residual(self);
        if residual > self.comm_tol {
            return Err(Error::Precondition(format!(
                "commutator residual {residual:e} exceeds tolerance {:e}",
                self.comm_tol
            )));
        }
        Ok(())
    }

    /// `max_m ‖self_m − other_m‖`.
    pub fn distance(&self, other: &MatrixTuple) -> f64 {
        self.matrices.iter().zip(&other.matrices).map(|(a, b)| operator_norm(&(a - b))).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> MatrixTupleJson {
        MatrixTupleJson {
            n: self.n(),
            d: self.d(),
            matrices: self.matrices.iter().map(row_major).collect(),
        }
    }

    pub fn from_json(json: &MatrixTupleJson) -> Result<Self> {
        if json.matrices.len() != json.d {
            return Err(Error::Input(format!("expected {} matrices, found {}", json.d, json.matrices.len())));
        }
        let matrices = json
            .matrices
            .iter()
            .map(|entries| from_row_major(json.n, entries))
            .collect::<Result<Vec<_>>>()?;
        Self::new(matrices)
    }
}

/// `{"n": int, "d": int, "matrices": [[[re,im],...],...]}`, each matrix row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixTupleJson {
    pub n: usize,
    pub d: usize,
    pub matrices: Vec<Vec<Complex64>>,
}

pub(crate) fn row_major(a: &CMatrix) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub(crate) fn from_row_major(n: usize, entries: &[Complex64]) -> Result<CMatrix> {
    if entries.len() != n * n {
        return Err(Error::Input(format!("expected {} entries, found {}", n * n, entries.len())));
    }
    Ok(DMatrix::from_row_slice(n, n, entries))
}

fn default_comm_tol(matrices: &[CMatrix]) -> f64 {
    let max = matrices.iter().map(operator_norm).fold(0.0, f64::max);
    1e-10 * (1.0 + max * max)
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Largest entry modulus.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues (ascending) and matching eigenvector columns of the Hermitian part of `a`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|i, j| eig.eigenvalues[*i].total_cmp(&eig.eigenvalues[*j]));
    let values = order.iter().map(|k| eig.eigenvalues[*k]).collect();
    let vectors = CMatrix::from_fn(a.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Largest commutator norm over all pairs of the tuple.
pub fn commutation_residual(t: &MatrixTuple) -> f64 {
    let ms = t.matrices();
    let mut worst = 0.0f64;
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            worst = worst.max(operator_norm(&(&ms[i] * &ms[j] - &ms[j] * &ms[i])));
        }
    }
    worst
}

/// Scales every matrix by `r ∈ (0, 1)`.
pub fn make_strict(t: &MatrixTuple, r: f64) -> Result<MatrixTuple> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Input(format!("strictness factor {r} is not in (0, 1)")));
    }
    let scale = Complex64::new(r, 0.0);
    let matrices = t.matrices().iter().map(|m| m * scale).collect();
    Ok(MatrixTuple { matrices, comm_tol: t.comm_tol() * r * r })
}

/// A unitary `q` with every `q* T_m q` (nearly) upper triangular.
#[derive(Clone, Debug)]
pub struct Triangularization {
    pub q: CMatrix,
    pub triangular: Vec<CMatrix>,
    /// Largest Frobenius mass below the diagonal over the tuple.
    pub residual: f64,
    /// Coefficients of the generic combination that was Schur-factorized.
    pub combination: Vec<Complex64>,
}

impl Triangularization {
    /// Diagonal of the Schur form of the generic combination.
    fn combination_diagonal(&self) -> Vec<Complex64> {
        let n = self.q.nrows();
        (0..n)
            .map(|k| self.triangular.iter().zip(&self.combination).map(|(t, c)| c * t[(k, k)]).sum())
            .collect()
    }
}

pub(crate) fn random_unit_vector(rng: &mut impl Rng, d: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> =
            (0..d).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

fn strictly_lower_mass(a: &CMatrix) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in j + 1..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

fn triangularize_once(t: &MatrixTuple, rng: &mut impl Rng) -> Triangularization {
    let combination = random_unit_vector(rng, t.d());
    let n = t.n();
    let mut m = CMatrix::zeros(n, n);
    for (c, tm) in combination.iter().zip(t.matrices()) {
        m += tm * *c;
    }
    let (q, _) = m.schur().unpack();
    let qa = q.adjoint();
    let triangular: Vec<CMatrix> = t.matrices().iter().map(|tm| &qa * tm * &q).collect();
    let residual = triangular.iter().map(strictly_lower_mass).fold(0.0, f64::max);
    Triangularization { q, triangular, residual, combination }
}

fn triangular_tolerance(t: &MatrixTuple) -> f64 {
    TRIANGULAR_TOL * t.max_norm()
}

/// Simultaneous Schur form of a commuting tuple, from a seeded random combination.
///
/// Fails with [`Error::DegenerateCombination`] when none of [`MAX_RETRIES`]
/// combinations triangularizes the tuple (derogatory combinations).
pub fn simultaneous_triangularize(t: &MatrixTuple, seed: u64) -> Result<Triangularization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = triangular_tolerance(t);
    let mut best: Option<Triangularization> = None;
    for _ in 0..MAX_RETRIES {
        let tri = triangularize_once(t, &mut rng);
        if tri.residual <= tol {
            return Ok(tri);
        }
        if best.as_ref().is_none_or(|b| tri.residual < b.residual) {
            best = Some(tri);
        }
    }
    Err(Error::DegenerateCombination { residual: best.map_or(f64::INFINITY, |b| b.residual), tries: MAX_RETRIES })
}

/// Joint eigenvalues (points of ℂᵈ) and, for diagonalizable tuples, shared eigenvectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointSpectrum {
    /// `eigenvalues[k][m]` is the k-th eigenvalue of `T_m`.
    pub eigenvalues: Vec<Vec<Complex64>>,
    /// Unit eigenvectors, aligned with `eigenvalues`.
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    pub diagonalizable: bool,
    /// `max ‖T_m v − λ_m v‖` over returned pairs, or the triangularization residual.
    pub residual: f64,
    /// Smallest eigenvalue separation of the generic combination.
    pub gap: f64,
}

fn min_gap(values: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            gap = gap.min((values[i] - values[j]).norm());
        }
    }
    gap
}

// Unit eigenvectors of an upper-triangular matrix with distinct diagonal.
fn triangular_eigenvectors(r: &CMatrix) -> Vec<DVector<Complex64>> {
    let n = r.nrows();
    (0..n)
        .map(|k| {
            let mut y = DVector::<Complex64>::zeros(n);
            y[k] = ONE;
            for j in (0..k).rev() {
                let s: Complex64 = (j + 1..=k).map(|l| r[(j, l)] * y[l]).sum();
                y[j] = -s / (r[(j, j)] - r[(k, k)]);
            }
            let norm = y.norm();
            y / Complex64::new(norm, 0.0)
        })
        .collect()
}

/// Joint spectrum of a commuting tuple.
///
/// The tuple is flagged diagonalizable when the generic combination has
/// eigenvalues separated by more than [`EIG_GAP_TOL`]; ties trigger fresh
/// combinations up to [`MAX_RETRIES`] times.
pub fn joint_spectrum(t: &MatrixTuple, seed: u64) -> Result<JointSpectrum> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = triangular_tolerance(t);
    let mut fallback: Option<(Triangularization, f64)> = None;
    let mut best_residual = f64::INFINITY;
    for _ in 0..MAX_RETRIES {
        let tri = triangularize_once(t, &mut rng);
        best_residual = best_residual.min(tri.residual);
        if tri.residual > tol {
            continue;
        }
        let diag = tri.combination_diagonal();
        let gap = min_gap(&diag);
        if gap > EIG_GAP_TOL {
            return Ok(diagonalizable_spectrum(t, &tri, gap));
        }
        if fallback.is_none() {
            fallback = Some((tri, gap));
        }
    }
    let Some((tri, gap)) = fallback else {
        return Err(Error::DegenerateCombination { residual: best_residual, tries: MAX_RETRIES });
    };
    Ok(JointSpectrum {
        eigenvalues: diagonals(&tri),
        eigenvectors: None,
        diagonalizable: false,
        residual: tri.residual,
        gap,
    })
}

fn diagonals(tri: &Triangularization) -> Vec<Vec<Complex64>> {
    let n = tri.q.nrows();
    (0..n).map(|k| tri.triangular.iter().map(|t| t[(k, k)]).collect()).collect()
}

fn diagonalizable_spectrum(t: &MatrixTuple, tri: &Triangularization, gap: f64) -> JointSpectrum {
    let n = t.n();
    let mut schur = CMatrix::zeros(n, n);
    for (c, tm) in tri.combination.iter().zip(&tri.triangular) {
        schur += tm * *c;
    }
    schur.fill_lower_triangle(ZERO, 1);
    let eigenvalues = diagonals(tri);
    let mut residual = 0.0f64;
    let mut vectors = Vec::with_capacity(n);
    for (k, y) in triangular_eigenvectors(&schur).into_iter().enumerate() {
        let v = &tri.q * y;
        for (m, tm) in t.matrices().iter().enumerate() {
            let r = tm * &v - &v * eigenvalues[k][m];
            residual = residual.max(r.norm());
        }
        vectors.push(v.iter().copied().collect());
    }
    JointSpectrum { eigenvalues, eigenvectors: Some(vectors), diagonalizable: true, residual, gap }
}

/// Nudges a commuting tuple to a nearby commuting tuple with distinct joint eigenvalues.
///
/// Returns `T′` with `max_m ‖T′_m − T_m‖ ≤ ε`, commutator residual within the
/// default tolerance of `T′`, and a diagonalizable joint spectrum.
///
/// * Diagonal tuples get a random diagonal shift.
/// * When a generic combination `M` generates the tuple (`T_m = p_m(M)`,
///   fitted on the Krylov basis `I, M, …, M^{n−1}`), `M` is perturbed to a
///   matrix `M′` with split eigenvalues and `T′_m = p_m(M′)`; these commute
///   exactly.
/// * Otherwise the tuple is randomly perturbed and projected back onto the
///   commuting variety by Gauss–Newton steps on the commutator equations.
pub fn perturb_to_diagonalizable(t: &MatrixTuple, epsilon: f64, seed: u64) -> Result<MatrixTuple> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Input(format!("perturbation size {epsilon} must be positive")));
    }
    t.require_commuting()?;
    if let Ok(js) = joint_spectrum(t, seed) {
        if js.diagonalizable {
            return Ok(t.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let accept = |candidate: MatrixTuple| -> Option<MatrixTuple> {
        let candidate = MatrixTuple::new(candidate.into_matrices()).ok()?;
        let ok = t.distance(&candidate) <= epsilon
            && candidate.is_commuting()
            && joint_spectrum(&candidate, seed).is_ok_and(|js| js.diagonalizable);
        ok.then_some(candidate)
    };

    if t.matrices().iter().all(is_diagonal) {
        for _ in 0..32 {
            if let Some(out) = accept(shift_diagonals(t, epsilon, &mut rng)) {
                return Ok(out);
            }
        }
    }

    for _ in 0..4 {
        let combination = random_unit_vector(&mut rng, t.d());
        if let Some(fit) = KrylovFit::new(t, &combination) {
            if let Some(out) = perturb_generator(t, &fit, epsilon, &mut rng, &accept) {
                return Ok(out);
            }
        }
    }

    newton_projection(t, epsilon, &mut rng, &accept)
}

fn is_diagonal(a: &CMatrix) -> bool {
    a.iter().enumerate().all(|(idx, z)| {
        let (i, j) = (idx % a.nrows(), idx / a.nrows());
        i == j || *z == ZERO
    })
}

fn shift_diagonals(t: &MatrixTuple, epsilon: f64, rng: &mut impl Rng) -> MatrixTuple {
    let matrices = t
        .matrices()
        .iter()
        .map(|a| {
            let mut out = a.clone();
            for k in 0..a.nrows() {
                let r = 0.5 * epsilon * rng.random::<f64>().sqrt();
                out[(k, k)] += Complex64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU);
            }
            out
        })
        .collect();
    MatrixTuple { matrices, comm_tol: t.comm_tol() }
}

// Coefficients a_{m,k} with T_m = Σ_k a_{m,k} M̂^k, M̂ = M/‖M‖.
struct KrylovFit {
    generator: CMatrix,
    coefficients: Vec<DVector<Complex64>>,
}

impl KrylovFit {
    fn new(t: &MatrixTuple, combination: &[Complex64]) -> Option<Self> {
        let n = t.n();
        let mut m = CMatrix::zeros(n, n);
        for (c, tm) in combination.iter().zip(t.matrices()) {
            m += tm * *c;
        }
        let scale = operator_norm(&m);
        if scale == 0.0 {
            return None;
        }
        let generator = m / Complex64::new(scale, 0.0);
        let powers = powers(&generator, n);
        let basis = CMatrix::from_fn(n * n, n, |row, k| powers[k][row]);
        let svd = basis.clone().svd(true, true);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        if smin <= 1e-10 * smax {
            return None;
        }
        let mut coefficients = Vec::with_capacity(t.d());
        for tm in t.matrices() {
            let target = DVector::from_column_slice(tm.as_slice());
            let a = svd.solve(&target, 0.0).ok()?;
            let fitted = &basis * &a;
            if (&fitted - &target).norm() > 1e-10 * (1.0 + tm.norm()) {
                return None;
            }
            coefficients.push(a);
        }
        Some(Self { generator, coefficients })
    }

    fn evaluate(&self, generator: &CMatrix) -> Vec<CMatrix> {
        let n = generator.nrows();
        let powers = powers(generator, n);
        self.coefficients
            .iter()
            .map(|a| powers.iter().zip(a.iter()).fold(CMatrix::zeros(n, n), |acc, (p, c)| acc + p * *c))
            .collect()
    }
}

fn powers(m: &CMatrix, count: usize) -> Vec<CMatrix> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(count);
    out.push(CMatrix::identity(n, n));
    for k in 1..count {
        let next = &out[k - 1] * m;
        out.push(next);
    }
    out
}

fn random_gaussian_matrix(rng: &mut impl Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let norm = operator_norm(&g);
    g / Complex64::new(norm, 0.0)
}

fn perturb_generator(
    t: &MatrixTuple,
    fit: &KrylovFit,
    epsilon: f64,
    rng: &mut impl Rng,
    accept: &impl Fn(MatrixTuple) -> Option<MatrixTuple>,
) -> Option<MatrixTuple> {
    let n = t.n();
    let sensitivity: f64 = fit
        .coefficients
        .iter()
        .map(|a| a.iter().enumerate().map(|(k, c)| k as f64 * c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut eta = epsilon / (1.0 + sensitivity);
    for _ in 0..48 {
        let g = random_gaussian_matrix(rng, n);
        let generator = &fit.generator + g * Complex64::new(eta, 0.0);
        let candidate = MatrixTuple { matrices: fit.evaluate(&generator), comm_tol: t.comm_tol() };
        let distance = t.distance(&candidate);
        if distance > epsilon {
            eta *= 0.25;
            continue;
        }
        if let Some(out) = accept(candidate) {
            return Some(out);
        }
        if distance < 0.25 * epsilon {
            eta *= 2.0;
        }
    }
    None
}

fn commutator_vector(xs: &[CMatrix]) -> DVector<Complex64> {
    let n = xs[0].nrows();
    let pairs = xs.len() * (xs.len() - 1) / 2;
    let mut out = DVector::<Complex64>::zeros(pairs * n * n);
    let mut row = 0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let c = &xs[i] * &xs[j] - &xs[j] * &xs[i];
            out.rows_mut(row, n * n).copy_from_slice(c.as_slice());
            row += n * n;
        }
    }
    out
}

// Jacobian of the stacked commutators with respect to the column-major vec of each X_m.
fn commutator_jacobian(xs: &[CMatrix]) -> CMatrix {
    let d = xs.len();
    let n = xs[0].nrows();
    let nn = n * n;
    let pairs = d * (d - 1) / 2;
    let id = CMatrix::identity(n, n);
    let mut jac = CMatrix::zeros(pairs * nn, d * nn);
    let mut row = 0;
    for i in 0..d {
        for j in i + 1..d {
            // vec(E B) = (Bᵀ ⊗ I) vec(E), vec(B E) = (I ⊗ B) vec(E)
            let di = xs[j].transpose().kronecker(&id) - id.kronecker(&xs[j]);
            let dj = id.kronecker(&xs[i]) - xs[i].transpose().kronecker(&id);
            jac.view_mut((row, i * nn), (nn, nn)).copy_from(&di);
            jac.view_mut((row, j * nn), (nn, nn)).copy_from(&dj);
            row += nn;
        }
    }
    jac
}

fn newton_projection(
    t: &MatrixTuple,
    epsilon: f64,
    rng: &mut impl Rng,
    accept: &impl Fn(MatrixTuple) -> Option<MatrixTuple>,
) -> Result<MatrixTuple> {
    const RESTARTS: usize = 8;
    const MAX_ITER: usize = 60;
    let n = t.n();
    let nn = n * n;
    let mut best = (f64::INFINITY, f64::INFINITY);
    for restart in 0..RESTARTS {
        let start_size = epsilon * 0.25 * 0.5f64.powi(restart as i32 / 2);
        let mut xs: Vec<CMatrix> = t
            .matrices()
            .iter()
            .map(|a| a + random_gaussian_matrix(rng, n) * Complex64::new(start_size, 0.0))
            .collect();
        let target = 1e-13 * (1.0 + t.max_norm().powi(2));
        for _ in 0..MAX_ITER {
            let residual = commutator_vector(&xs);
            if residual.norm() <= target {
                break;
            }
            let jac = commutator_jacobian(&xs);
            let svd = jac.svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max();
            let Ok(step) = svd.solve(&(-residual), cutoff) else {
                break;
            };
            for (m, x) in xs.iter_mut().enumerate() {
                let delta = CMatrix::from_column_slice(n, n, &step.as_slice()[m * nn..(m + 1) * nn]);
                *x += delta;
            }
        }
        let candidate = MatrixTuple { matrices: xs, comm_tol: t.comm_tol() };
        let distance = t.distance(&candidate);
        let commutator = commutation_residual(&candidate);
        if distance < best.0 {
            best = (distance, commutator);
        }
        if let Some(out) = accept(candidate) {
            return Ok(out);
        }
    }
    Err(Error::PerturbationFailure { distance: best.0, commutator: best.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real(rows: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_slice(rows, rows, &data.iter().map(|x| c(*x, 0.0)).collect::<Vec<_>>())
    }

    fn diag(values: &[Complex64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_row_slice(values))
    }

    fn gaussian(rng: &mut impl Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
    }

    fn random_unitary(rng: &mut impl Rng, n: usize) -> CMatrix {
        gaussian(rng, n).qr().q()
    }

    fn jordan3() -> CMatrix {
        real(3, &[0., 1., 0., 0., 0., 1., 0., 0., 0.])
    }

    // Largest singular value by power iteration on A*A.
    fn power_iteration_norm(a: &CMatrix) -> f64 {
        let h = a.adjoint() * a;
        let mut v = DVector::from_fn(a.ncols(), |i, _| c(1.0 + i as f64, 0.5));
        let mut value = 0.0;
        for _ in 0..2000 {
            let w = &h * &v;
            value = w.norm() / v.norm();
            v = &w / c(w.norm(), 0.0);
        }
        value.sqrt()
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&real(3, &[0.5, 0., 0., 0., 1. / 3., 0., 0., 0., 0.])) - 0.5).abs() < 1e-15);
        assert!((operator_norm(&real(2, &[0., 1., 0., 0.])) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = gaussian(&mut rng, 3);
            let (x, y) = (operator_norm(&a), power_iteration_norm(&a));
            assert!((x - y).abs() < 1e-8 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn commutation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gaussian(&mut rng, 3) * c(0.3, 0.0);
        let t = MatrixTuple::new(vec![a.clone(), &a * &a]).unwrap();
        assert!(commutation_residual(&t) < 1e-12);

        let t = MatrixTuple::new(vec![real(2, &[0., 1., 0., 0.]), real(2, &[0., 0., 1., 0.])]).unwrap();
        assert!((commutation_residual(&t) - 1.0).abs() < 1e-15);
        assert!(!t.is_commuting());

        let t = MatrixTuple::new(vec![diag(&[c(0.1, 0.), c(0.2, 0.)]), diag(&[c(0.5, 0.3), c(-0.1, 0.)])]).unwrap();
        assert_eq!(commutation_residual(&t), 0.0);
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let err = MatrixTuple::new(vec![CMatrix::zeros(2, 2), CMatrix::zeros(3, 3)]);
        assert!(matches!(err, Err(Error::Input(_))));
        assert!(MatrixTuple::new(vec![]).is_err());
        let mut bad = CMatrix::zeros(2, 2);
        bad[(0, 1)] = c(f64::INFINITY, 0.0);
        assert!(MatrixTuple::new(vec![bad]).is_err());
    }

    #[test]
    fn make_strict_examples() {
        let u = MatrixTuple::new(vec![diag(&[c(1., 0.), c(0., 1.)]), diag(&[c(-1., 0.), c(0.6, 0.8)])]).unwrap();
        let s = make_strict(&u, 0.99).unwrap();
        for m in s.matrices() {
            assert!((operator_norm(m) - 0.99).abs() < 1e-15);
        }
        let twice = make_strict(&make_strict(&u, 0.9).unwrap(), 0.8).unwrap();
        let once = make_strict(&u, 0.72).unwrap();
        assert!(twice.distance(&once) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = MatrixTuple::new(vec![gaussian(&mut rng, 3), gaussian(&mut rng, 3)]).unwrap();
        let before = commutation_residual(&t);
        let after = commutation_residual(&make_strict(&t, 0.5).unwrap());
        assert!((after - 0.25 * before).abs() < 1e-12 * before);

        assert!(make_strict(&u, 1.0).is_err());
        assert!(make_strict(&u, 0.0).is_err());
    }

    #[test]
    fn triangularize_upper_triangular_pair() {
        let a = CMatrix::from_row_slice(3, 3, &[c(0.5, 0.), c(0.2, 0.1), c(0.1, 0.), ZERO, c(-0.3, 0.), c(0.4, 0.), ZERO, ZERO, c(0.1, 0.2)]);
        let b = &a * &a * c(0.5, 0.) + &a * c(0.1, -0.2);
        let t = MatrixTuple::new(vec![a, b]).unwrap();
        let tri = simultaneous_triangularize(&t, 1).unwrap();
        assert!(tri.residual < 1e-10);
        let qq = tri.q.adjoint() * &tri.q - CMatrix::identity(3, 3);
        assert!(qq.norm() < 1e-10);
    }

    #[test]
    fn triangularize_diagonal_tuple_keeps_eigenvalues() {
        let d1 = [c(0.1, 0.), c(0.5, 0.2), c(-0.4, 0.)];
        let d2 = [c(0.3, 0.), c(0.0, 0.1), c(0.2, 0.2)];
        let t = MatrixTuple::new(vec![diag(&d1), diag(&d2)]).unwrap();
        let js = joint_spectrum(&t, 9).unwrap();
        assert!(js.diagonalizable);
        let mut expected: Vec<[Complex64; 2]> = (0..3).map(|k| [d1[k], d2[k]]).collect();
        for point in &js.eigenvalues {
            let pos = expected
                .iter()
                .position(|e| (e[0] - point[0]).norm() < 1e-12 && (e[1] - point[1]).norm() < 1e-12)
                .expect("joint eigenvalue present");
            expected.remove(pos);
        }
    }

    #[test]
    fn triangularize_polynomial_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..20 {
            let a = gaussian(&mut rng, 4) * c(0.5, 0.);
            let p = &a * &a * c(0.3, 0.1) + &a * c(-0.2, 0.) + CMatrix::identity(4, 4) * c(0.1, 0.);
            let q = &a * &a * &a * c(0.05, 0.) + &a * c(0.7, 0.2);
            let t = MatrixTuple::new(vec![p.clone(), q.clone()]).unwrap();
            let tri = simultaneous_triangularize(&t, seed).unwrap();
            assert!(tri.residual < 1e-8, "{}", tri.residual);
            // diagonals reproduce the eigenvalue multisets of each matrix
            for (orig, tm) in [p, q].iter().zip(&tri.triangular) {
                let mut eig: Vec<Complex64> = orig.clone().schur().eigenvalues().unwrap().iter().copied().collect();
                for k in 0..4 {
                    let pos = eig.iter().position(|e| (e - tm[(k, k)]).norm() < 1e-7).unwrap();
                    eig.remove(pos);
                }
            }
        }
    }

    #[test]
    fn nilpotent_tuple_has_zero_spectrum() {
        let n = jordan3();
        let t = MatrixTuple::new(vec![&n * c(0.3, 0.), &n * c(-0.2, 0.1), &n * c(0.5, 0.)]).unwrap();
        let js = joint_spectrum(&t, 0).unwrap();
        assert!(!js.diagonalizable);
        assert!(js.eigenvalues.iter().flatten().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn recovers_constructed_joint_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..20 {
            let v = gaussian(&mut rng, 3);
            let vinv = v.clone().try_inverse().unwrap();
            let points: Vec<Vec<Complex64>> =
                (0..3).map(|_| (0..3).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()).collect();
            let matrices = (0..3)
                .map(|m| &v * diag(&points.iter().map(|p| p[m]).collect::<Vec<_>>()) * &vinv)
                .collect();
            let t = MatrixTuple::new(matrices).unwrap();
            let js = joint_spectrum(&t, seed).unwrap();
            assert!(js.diagonalizable);
            assert!(js.residual < 1e-7);
            for point in &points {
                assert!(js
                    .eigenvalues
                    .iter()
                    .any(|e| e.iter().zip(point).all(|(a, b)| (a - b).norm() < 1e-8)));
            }
        }
    }

    #[test]
    fn perturb_leaves_diagonalizable_tuples_alone() {
        let t = MatrixTuple::new(vec![diag(&[c(0.1, 0.), c(0.2, 0.), c(0.3, 0.)]), diag(&[c(0., 0.), c(0.5, 0.), c(0.1, 0.)])]).unwrap();
        assert_eq!(perturb_to_diagonalizable(&t, 1e-6, 0).unwrap(), t);
    }

    #[test]
    fn perturb_nilpotent_family() {
        let n = jordan3();
        let t = MatrixTuple::new(vec![&n * c(0.9, 0.), &n * c(-0.4, 0.3), &n * c(0.2, 0.)]).unwrap();
        for (seed, eps) in [(0, 1e-6), (1, 1e-3), (2, 1e-7)] {
            let p = perturb_to_diagonalizable(&t, eps, seed).unwrap();
            assert!(t.distance(&p) <= eps);
            assert!(commutation_residual(&p) < 1e-10);
            assert!(joint_spectrum(&p, seed).unwrap().diagonalizable);
        }
    }

    #[test]
    fn perturb_zero_tuple_gives_small_diagonal() {
        let t = MatrixTuple::new(vec![CMatrix::zeros(3, 3); 3]).unwrap();
        let p = perturb_to_diagonalizable(&t, 1e-3, 5).unwrap();
        for m in p.matrices() {
            assert!(is_diagonal(m));
            assert!(m.iter().all(|z| z.norm() <= 1e-3));
        }
        assert!(joint_spectrum(&p, 5).unwrap().diagonalizable);
    }

    #[test]
    fn perturb_derogatory_pair_uses_projection() {
        // E13 and E23 commute, and every combination of them is derogatory.
        let mut e13 = CMatrix::zeros(3, 3);
        e13[(0, 2)] = ONE;
        let mut e23 = CMatrix::zeros(3, 3);
        e23[(1, 2)] = ONE;
        let t = MatrixTuple::new(vec![e13 * c(0.5, 0.), e23 * c(0.5, 0.)]).unwrap();
        let eps = 1e-3;
        let p = perturb_to_diagonalizable(&t, eps, 2).unwrap();
        assert!(t.distance(&p) <= eps);
        assert!(p.is_commuting());
        assert!(joint_spectrum(&p, 2).unwrap().diagonalizable);
    }

    #[test]
    fn json_round_trip_preserves_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = MatrixTuple::new(vec![gaussian(&mut rng, 3), gaussian(&mut rng, 3)]).unwrap();
        let text = serde_json::to_string(&t.to_json()).unwrap();
        let back = MatrixTuple::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.matrices(), t.matrices());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn norm_is_unitarily_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = gaussian(&mut rng, 3);
            let q = random_unitary(&mut rng, 3);
            let b = &q * &a * q.adjoint();
            prop_assert!((operator_norm(&a) - operator_norm(&b)).abs() < 1e-10 * operator_norm(&a));
        }

        #[test]
        fn spectral_consistency_for_polynomial_tuples(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = gaussian(&mut rng, 3) * c(0.4, 0.);
            let t = MatrixTuple::new(vec![a.clone(), &a * &a, &a * c(0.5, 0.5) + CMatrix::identity(3, 3) * c(0.1, 0.)]).unwrap();
            let js = joint_spectrum(&t, seed).unwrap();
            prop_assert!(js.diagonalizable);
            prop_assert!(js.residual <= 1e-7);
        }
    }
}
