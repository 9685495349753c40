//! Agler certificates for three-point problems.
//!
//! A problem with nodes `z_1, z_2, z_3 ∈ 𝔻ᵈ` and targets `t_j` is solvable
//! iff there are Hermitian PSD 3×3 matrices `Γ¹,…,Γᵈ` with
//!
//! ```text
//! 1 − t_j·conj(t_k) = Σ_n (1 − z_jⁿ·conj(z_kⁿ)) · Γⁿ_{j,k}     (j, k = 1..3)
//! ```
//!
//! Index convention: entry `(j, k)` of the identity uses `Γⁿ_{j,k}` itself
//! (not its conjugate), which is consistent because both sides are Hermitian
//! in `(j, k)`. Realizations factor `conj(Γⁿ)` accordingly.
//!
//! The solver runs Dykstra's alternating projections between the affine set
//! cut out by these 9 real equations and the product of PSD cones. Two
//! additions make the answer decisive:
//! * candidates are polished by Gauss–Newton on a factored form `Γ = B*B`,
//!   so boundary (low-rank) certificates are found to rounding accuracy;
//! * infeasibility is only declared with a Farkas certificate `y` such that
//!   `A*y` is PSD and `⟨b, y⟩ < 0`, which also yields a rigorous lower bound
//!   on the distance between the affine set and the cone.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::{DISC_MARGIN, ZERO};
use crate::error::{Error, Result};
use crate::matrix::{hermitian_eigen, max_abs, CMatrix};
use crate::pick::PickProblem;

pub const FEAS_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;
pub const MAX_ITER: usize = 50_000;

const SQRT2: f64 = std::f64::consts::SQRT_2;
/// Real coordinates per Hermitian 3×3 block.
const BLOCK: usize = 9;
/// Upper off-diagonal entries, in coordinate order.
const OFF_DIAG: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
/// How a factored candidate is seeded from a PSD point: drop eigenvalues
/// below a relative threshold, or keep full rank with eigenvalues floored.
#[derive(Clone, Copy, Debug)]
enum PolishStart {
    Truncate(f64),
    Floor(f64),
}

const POLISH_STARTS: [PolishStart; 6] = [
    PolishStart::Truncate(1e-2),
    PolishStart::Truncate(1e-4),
    PolishStart::Truncate(1e-8),
    PolishStart::Floor(1e-6),
    PolishStart::Floor(1e-3),
    PolishStart::Floor(1e-2),
];
const POLISH_ITERS: usize = 40;
/// Iterations between feasibility and Farkas checks.
const CHECK_EVERY: usize = 10;

/// `d` Hermitian PSD 3×3 blocks with their recomputed residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct AglerCertificate {
    pub d: usize,
    pub gammas: Vec<CMatrix>,
    pub feas_residual: f64,
    pub min_eig: f64,
}

impl AglerCertificate {
    /// Wraps blocks for `problem`, recomputing both residuals.
    pub fn new(gammas: Vec<CMatrix>, problem: &PickProblem) -> Result<Self> {
        if gammas.len() != problem.d() {
            return Err(Error::Input(format!("{} blocks for a problem with d = {}", gammas.len(), problem.d())));
        }
        for (n, g) in gammas.iter().enumerate() {
            if g.shape() != (3, 3) {
                return Err(Error::Input(format!("block {n} is not 3×3")));
            }
            if max_abs(&(g - g.adjoint())) > 1e-12 {
                return Err(Error::Input(format!("block {n} is not Hermitian")));
            }
        }
        let (feas_residual, min_eig) = residual_of(&gammas, problem);
        Ok(Self { d: gammas.len(), gammas, feas_residual, min_eig })
    }

    pub fn to_json(&self) -> CertificateJson {
        CertificateJson {
            d: self.d,
            gammas: self.gammas.iter().map(|g| (0..3).map(|i| (0..3).map(|j| g[(i, j)]).collect()).collect()).collect(),
            feas_residual: self.feas_residual,
            min_eig: self.min_eig,
        }
    }

    /// Parses and re-validates against `problem`; stored residuals are ignored.
    pub fn from_json(json: &CertificateJson, problem: &PickProblem) -> Result<Self> {
        let mut gammas = Vec::with_capacity(json.gammas.len());
        for (n, rows) in json.gammas.iter().enumerate() {
            if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
                return Err(Error::Input(format!("block {n} is not 3×3")));
            }
            gammas.push(CMatrix::from_fn(3, 3, |i, j| rows[i][j]));
        }
        if gammas.len() != json.d {
            return Err(Error::Input(format!("declared d = {} but found {} blocks", json.d, gammas.len())));
        }
        Self::new(gammas, problem)
    }
}

/// `{"d", "gammas": [[[re,im]×3]×3 × d], "feas_residual", "min_eig"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub d: usize,
    pub gammas: Vec<Vec<Vec<Complex64>>>,
    pub feas_residual: f64,
    pub min_eig: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeasibilityStatus {
    Feasible(AglerCertificate),
    /// Rigorous lower bound on the distance between the affine set and the cone.
    Infeasible { gap: f64 },
    /// Last observed distance between the two projection sequences.
    Indeterminate { distance: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityOutcome {
    pub status: FeasibilityStatus,
    pub iterations: usize,
}

impl FeasibilityOutcome {
    pub fn label(&self) -> &'static str {
        match self.status {
            FeasibilityStatus::Feasible(_) => "FEASIBLE",
            FeasibilityStatus::Infeasible { .. } => "INFEASIBLE",
            FeasibilityStatus::Indeterminate { .. } => "INDETERMINATE",
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Feasible(_))
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self.status, FeasibilityStatus::Infeasible { .. })
    }

    pub fn certificate(&self) -> Option<&AglerCertificate> {
        match &self.status {
            FeasibilityStatus::Feasible(c) => Some(c),
            _ => None,
        }
    }
}

/// Equality residual and smallest block eigenvalue, recomputed from scratch.
pub fn residual(cert: &AglerCertificate, problem: &PickProblem) -> Result<(f64, f64)> {
    if cert.gammas.len() != problem.d() {
        return Err(Error::Input(format!("certificate has d = {}, problem has d = {}", cert.gammas.len(), problem.d())));
    }
    Ok(residual_of(&cert.gammas, problem))
}

/// Moves a certificate along the null space of the identity, restricted to
/// the ranges of its blocks, until `Σ rank(Γⁿ)² ≤ 9`. Each step zeroes at
/// least one eigenvalue, so the total rank only drops; the identity residual
/// is unchanged up to rounding. Eigenvalues at or below `rank_tol` count as
/// zero.
pub fn reduce_rank(cert: &AglerCertificate, problem: &PickProblem, rank_tol: f64) -> Result<AglerCertificate> {
    let nodes = problem.nodes();
    let mut gammas = cert.gammas.clone();
    loop {
        let ranges: Vec<(Vec<f64>, CMatrix)> = gammas
            .iter()
            .map(|g| {
                let (values, vectors) = hermitian_eigen(g);
                let keep: Vec<usize> = (0..3).filter(|&i| values[i] > rank_tol).collect();
                let basis = CMatrix::from_fn(3, keep.len(), |row, col| vectors[(row, keep[col])]);
                (keep.iter().map(|&i| values[i]).collect(), basis)
            })
            .collect();
        let unknowns: usize = ranges.iter().map(|(v, _)| v.len() * v.len()).sum();
        if unknowns <= BLOCK {
            break;
        }
        // columns: the identity's 9 real equations applied to V·E_p·V* for a
        // real basis E_p of Hermitian r×r matrices, block by block
        let mut directions: Vec<(usize, CMatrix)> = Vec::with_capacity(unknowns);
        for (n, (values, _)) in ranges.iter().enumerate() {
            let r = values.len();
            for a in 0..r {
                for b in a..r {
                    let mut e = CMatrix::zeros(r, r);
                    if a == b {
                        e[(a, a)] = Complex64::new(1.0, 0.0);
                        directions.push((n, e));
                    } else {
                        e[(a, b)] = Complex64::new(1.0, 0.0);
                        e[(b, a)] = Complex64::new(1.0, 0.0);
                        directions.push((n, e.clone()));
                        e[(a, b)] = Complex64::new(0.0, 1.0);
                        e[(b, a)] = Complex64::new(0.0, -1.0);
                        directions.push((n, e));
                    }
                }
            }
        }
        let mut m = DMatrix::<f64>::zeros(BLOCK, unknowns);
        for (col, (n, e)) in directions.iter().enumerate() {
            let basis = &ranges[*n].1;
            let delta = basis * e * basis.adjoint();
            let entry = |j: usize, k: usize| (1.0 - nodes[j][*n] * nodes[k][*n].conj()) * delta[(j, k)];
            for j in 0..3 {
                m[(j, col)] = entry(j, j).re;
            }
            for (i, &(j, k)) in OFF_DIAG.iter().enumerate() {
                m[(3 + 2 * i, col)] = entry(j, k).re;
                m[(4 + 2 * i, col)] = entry(j, k).im;
            }
        }
        let normal = m.transpose() * &m;
        let eig = normal.symmetric_eigen();
        let smallest = (0..unknowns).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap_or(0);
        let w = eig.eigenvectors.column(smallest);
        // the direction in each block, whitened by its eigenvalues
        let mut steps: Vec<CMatrix> = ranges.iter().map(|(v, _)| CMatrix::zeros(v.len(), v.len())).collect();
        for (coef, (n, e)) in w.iter().zip(&directions) {
            steps[*n] += e * Complex64::new(*coef, 0.0);
        }
        let mut most = 0.0f64;
        let mut least = 0.0f64;
        for ((values, _), h) in ranges.iter().zip(&steps) {
            if values.is_empty() {
                continue;
            }
            let scaled = CMatrix::from_fn(values.len(), values.len(), |a, b| h[(a, b)] / (values[a] * values[b]).sqrt());
            let mu = hermitian_eigen(&scaled).0;
            least = least.min(mu[0]);
            most = most.max(mu[mu.len() - 1]);
        }
        // step until the first eigenvalue reaches zero, in whichever direction is shorter
        let alpha = if -least >= most { -1.0 / least } else { -1.0 / most };
        if !alpha.is_finite() {
            break;
        }
        for (g, ((_, basis), h)) in gammas.iter_mut().zip(ranges.iter().zip(&steps)) {
            let moved = &*g + basis * h * basis.adjoint() * Complex64::new(alpha, 0.0);
            *g = (&moved + moved.adjoint()) * Complex64::new(0.5, 0.0);
        }
        // scrub the eigenvalues the step was aimed at
        for g in gammas.iter_mut() {
            let (values, vectors) = hermitian_eigen(g);
            let mut kept = CMatrix::zeros(3, 3);
            for i in 0..3 {
                if values[i] > rank_tol {
                    let v = vectors.column(i);
                    kept += &v * v.adjoint() * Complex64::new(values[i], 0.0);
                }
            }
            *g = kept;
        }
    }
    AglerCertificate::new(gammas, problem)
}

fn residual_of(gammas: &[CMatrix], problem: &PickProblem) -> (f64, f64) {
    let nodes = problem.nodes();
    let t = problem.targets();
    let mut worst = 0.0f64;
    for j in 0..3 {
        for k in 0..3 {
            let mut rhs = ZERO;
            for (n, g) in gammas.iter().enumerate() {
                rhs += (1.0 - nodes[j][n] * nodes[k][n].conj()) * g[(j, k)];
            }
            worst = worst.max((1.0 - t[j] * t[k].conj() - rhs).norm());
        }
    }
    let min_eig = gammas.iter().map(|g| hermitian_eigen(g).0[0]).fold(f64::INFINITY, f64::min);
    (worst, if gammas.is_empty() { 0.0 } else { min_eig })
}

/// The classical Pick matrix `[(1 − t_j t̄_k)/(1 − z_j z̄_k)]` of a one-variable problem.
pub fn pick_matrix_1d(problem: &PickProblem) -> Result<CMatrix> {
    if problem.d() != 1 {
        return Err(Error::Input(format!("the Pick matrix oracle needs d = 1, got {}", problem.d())));
    }
    let z: Vec<Complex64> = problem.nodes().iter().map(|n| n[0]).collect();
    let t = problem.targets();
    Ok(CMatrix::from_fn(3, 3, |j, k| (1.0 - t[j] * t[k].conj()) / (1.0 - z[j] * z[k].conj())))
}

/// One-variable solvability by positivity of the Pick matrix (smallest eigenvalue ≥ −1e−10).
pub fn pick_oracle_1d(problem: &PickProblem) -> Result<bool> {
    Ok(hermitian_eigen(&pick_matrix_1d(problem)?).0[0] >= -1e-10)
}

/// The linear constraints in real coordinates.
///
/// Each Hermitian block is stored isometrically as
/// `[g00, g11, g22, √2·Re g01, √2·Im g01, √2·Re g02, √2·Im g02, √2·Re g12, √2·Im g12]`,
/// so Euclidean projections in coordinates are Frobenius projections of blocks.
struct Constraints {
    d: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    /// `Aᵀ(AAᵀ)⁻¹`.
    a_pinv: DMatrix<f64>,
    /// `(AAᵀ)⁻¹A`, the least-squares multiplier map.
    multiplier: DMatrix<f64>,
    /// `min_n (1 − |z_jⁿ|²)` per node.
    min_kernel_diag: [f64; 3],
}

impl Constraints {
    fn new(problem: &PickProblem) -> Self {
        let d = problem.d();
        let nodes = problem.nodes();
        let t = problem.targets();
        let mut a = DMatrix::<f64>::zeros(9, BLOCK * d);
        let mut b = DVector::<f64>::zeros(9);
        let mut min_kernel_diag = [f64::INFINITY; 3];
        for j in 0..3 {
            b[j] = 1.0 - t[j].norm_sqr();
            for n in 0..d {
                let k = 1.0 - nodes[j][n].norm_sqr();
                a[(j, BLOCK * n + j)] = k;
                min_kernel_diag[j] = min_kernel_diag[j].min(k);
            }
        }
        for (p, &(j, k)) in OFF_DIAG.iter().enumerate() {
            let l = 1.0 - t[j] * t[k].conj();
            b[3 + 2 * p] = l.re;
            b[4 + 2 * p] = l.im;
            for n in 0..d {
                let kern = (1.0 - nodes[j][n] * nodes[k][n].conj()) / SQRT2;
                let (re, im) = (BLOCK * n + 3 + 2 * p, BLOCK * n + 4 + 2 * p);
                a[(3 + 2 * p, re)] = kern.re;
                a[(3 + 2 * p, im)] = -kern.im;
                a[(4 + 2 * p, re)] = kern.im;
                a[(4 + 2 * p, im)] = kern.re;
            }
        }
        let gram = &a * a.transpose();
        let gram_inv = gram.try_inverse().expect("constraint rows are independent inside the disc");
        let a_pinv = a.transpose() * &gram_inv;
        let multiplier = &gram_inv * &a;
        Self { d, a, b, a_pinv, multiplier, min_kernel_diag }
    }

    fn project_affine(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.a_pinv * (&self.a * x - &self.b)
    }
}

fn block_to_matrix(x: &[f64]) -> CMatrix {
    let mut g = CMatrix::zeros(3, 3);
    for i in 0..3 {
        g[(i, i)] = Complex64::new(x[i], 0.0);
    }
    for (p, &(j, k)) in OFF_DIAG.iter().enumerate() {
        let v = Complex64::new(x[3 + 2 * p], x[4 + 2 * p]) / SQRT2;
        g[(j, k)] = v;
        g[(k, j)] = v.conj();
    }
    g
}

fn matrix_to_block(g: &CMatrix, out: &mut [f64]) {
    for i in 0..3 {
        out[i] = g[(i, i)].re;
    }
    for (p, &(j, k)) in OFF_DIAG.iter().enumerate() {
        // average the two triangles so slightly non-Hermitian input maps to its Hermitian part
        let v = (g[(j, k)] + g[(k, j)].conj()) * 0.5 * SQRT2;
        out[3 + 2 * p] = v.re;
        out[4 + 2 * p] = v.im;
    }
}

fn to_blocks(x: &DVector<f64>, d: usize) -> Vec<CMatrix> {
    (0..d).map(|n| block_to_matrix(&x.as_slice()[BLOCK * n..BLOCK * (n + 1)])).collect()
}

fn from_blocks(gammas: &[CMatrix]) -> DVector<f64> {
    let mut x = DVector::<f64>::zeros(BLOCK * gammas.len());
    for (n, g) in gammas.iter().enumerate() {
        matrix_to_block(g, &mut x.as_mut_slice()[BLOCK * n..BLOCK * (n + 1)]);
    }
    x
}

/// Projection onto the PSD cone product; also returns the smallest eigenvalue seen.
fn project_psd(x: &DVector<f64>, d: usize) -> (DVector<f64>, f64) {
    let mut out = DVector::<f64>::zeros(x.len());
    let mut min_eig = f64::INFINITY;
    for n in 0..d {
        let g = block_to_matrix(&x.as_slice()[BLOCK * n..BLOCK * (n + 1)]);
        let (values, vectors) = hermitian_eigen(&g);
        min_eig = min_eig.min(values[0]);
        let clipped = DMatrix::from_diagonal(&DVector::from_iterator(3, values.iter().map(|v| Complex64::new(v.max(0.0), 0.0))));
        let p = &vectors * clipped * vectors.adjoint();
        matrix_to_block(&p, &mut out.as_mut_slice()[BLOCK * n..BLOCK * (n + 1)]);
    }
    (out, min_eig)
}

fn min_block_eig(x: &DVector<f64>, d: usize) -> f64 {
    to_blocks(x, d).iter().map(|g| hermitian_eigen(g).0[0]).fold(f64::INFINITY, f64::min)
}

/// Gauss–Newton on `Γⁿ = Bₙ*Bₙ` from the PSD point `start`, with the rank of
/// each `Bₙ` fixed by a relative eigenvalue threshold. Every iterate is PSD by
/// construction, so convergence of the equations gives an exact certificate.
fn polish(cons: &Constraints, start: &DVector<f64>, seed: PolishStart) -> Option<Vec<CMatrix>> {
    let d = cons.d;
    let blocks = to_blocks(start, d);
    let eigen: Vec<(Vec<f64>, CMatrix)> = blocks.iter().map(hermitian_eigen).collect();
    let scale = eigen.iter().map(|(v, _)| v[2]).fold(0.0, f64::max).max(1e-300);
    let mut factors: Vec<CMatrix> = eigen
        .iter()
        .map(|(values, vectors)| {
            let (keep, floor): (Vec<usize>, f64) = match seed {
                PolishStart::Truncate(rel) => ((0..3).filter(|i| values[*i] > rel * scale).collect(), 0.0),
                PolishStart::Floor(rel) => ((0..3).collect(), rel * scale),
            };
            CMatrix::from_fn(keep.len(), 3, |r, c| vectors[(c, keep[r])].conj() * values[keep[r]].max(floor).sqrt())
        })
        .collect();
    let gram = |fs: &[CMatrix]| -> Vec<CMatrix> { fs.iter().map(|b| b.adjoint() * b).collect() };
    let equations = |fs: &[CMatrix]| &cons.a * from_blocks(&gram(fs)) - &cons.b;
    let mut f = equations(&factors);
    let target = 1e-14 * (1.0 + cons.b.amax());
    for _ in 0..POLISH_ITERS {
        if f.amax() <= target {
            break;
        }
        let params: usize = factors.iter().map(|b| 2 * b.len()).sum();
        if params == 0 {
            return None;
        }
        let mut jac = DMatrix::<f64>::zeros(9, params);
        let mut col = 0;
        let mut dg = vec![0.0; BLOCK];
        for (n, b) in factors.iter().enumerate() {
            for r in 0..b.nrows() {
                for c in 0..3 {
                    for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                        let mut db = CMatrix::zeros(b.nrows(), 3);
                        db[(r, c)] = unit;
                        let delta = db.adjoint() * b + b.adjoint() * &db;
                        matrix_to_block(&delta, &mut dg);
                        let a_block = cons.a.columns(BLOCK * n, BLOCK);
                        jac.set_column(col, &(a_block * DVector::from_column_slice(&dg)));
                        col += 1;
                    }
                }
            }
        }
        let step = jac.svd(true, true).solve(&(-&f), 1e-12).ok()?;
        let norm_before = f.norm();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let trial = apply_step(&factors, &step, t);
            let f_trial = equations(&trial);
            if f_trial.norm() < norm_before {
                factors = trial;
                f = f_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f.amax() <= 1e-12 * (1.0 + cons.b.amax())).then(|| gram(&factors))
}

fn apply_step(factors: &[CMatrix], step: &DVector<f64>, t: f64) -> Vec<CMatrix> {
    let mut k = 0;
    factors
        .iter()
        .map(|b| {
            let mut out = b.clone();
            for r in 0..b.nrows() {
                for c in 0..3 {
                    out[(r, c)] += Complex64::new(step[k], step[k + 1]) * t;
                    k += 2;
                }
            }
            out
        })
        .collect()
}

fn try_polish(cons: &Constraints, start: &DVector<f64>, problem: &PickProblem, tol: f64) -> Option<AglerCertificate> {
    POLISH_STARTS.iter().find_map(|seed| {
        let gammas = polish(cons, start, *seed)?;
        let cert = AglerCertificate::new(gammas, problem).ok()?;
        (cert.feas_residual <= tol && cert.min_eig >= -tol).then_some(cert)
    })
}

/// Farkas test from the displacement `v` between a cone point and an affine point.
///
/// Least-squares multipliers `y` with `A*y ≈ v` are shifted on the diagonal
/// rows until `A*y` is PSD; then for every cone point `K` and affine point `X`,
/// `‖K − X‖ ≥ −⟨b, y⟩ / ‖A*y‖`. Returns that bound when it is positive.
fn farkas_gap(cons: &Constraints, v: &DVector<f64>) -> Option<f64> {
    farkas_bound(cons, &cons.multiplier * v)
}

/// Validates multipliers `y` as a Farkas certificate and returns the distance bound.
fn farkas_bound(cons: &Constraints, y: DVector<f64>) -> Option<f64> {
    let d = cons.d;
    let scale = y.norm();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut y = y / scale;
    let s = cons.a.transpose() * &y;
    let min_eig = min_block_eig(&s, d);
    let eta = (-min_eig).max(0.0) + 1e-13 * s.norm();
    for j in 0..3 {
        y[j] += eta / cons.min_kernel_diag[j];
    }
    let s = cons.a.transpose() * &y;
    if min_block_eig(&s, d) < 0.0 {
        return None;
    }
    let value = cons.b.dot(&y);
    let rounding = 1e-12 * cons.b.iter().zip(y.iter()).map(|(b, y)| (b * y).abs()).sum::<f64>();
    let norm = s.norm();
    (value < -rounding && norm > 0.0).then(|| -value / norm)
}

/// `max cᵀz − ½zᵀQz + μ Σ_n log det S_n(z)` along a decreasing `μ`, where
/// each `S_n(z) = m0_n + D_n z` is an affine Hermitian 3×3 block given in
/// block coordinates.
struct Barrier {
    c: DVector<f64>,
    q: Option<DMatrix<f64>>,
    m0: Vec<DVector<f64>>,
    dirs: Vec<DMatrix<f64>>,
}

impl Barrier {
    fn slack(&self, z: &DVector<f64>) -> Vec<CMatrix> {
        self.m0.iter().zip(&self.dirs).map(|(m, d)| block_to_matrix((m + d * z).as_slice())).collect()
    }

    fn objective(&self, z: &DVector<f64>, mu: f64) -> f64 {
        let Some(log_det) = inverse_and_log_det(&self.slack(z)).map(|(_, l)| l) else {
            return f64::NEG_INFINITY;
        };
        let quad = self.q.as_ref().map_or(0.0, |q| 0.5 * z.dot(&(q * z)));
        self.c.dot(z) - quad + mu * log_det
    }

    /// Newton's method at fixed `μ`; `z` must keep every block positive definite.
    fn center(&self, z: &mut DVector<f64>, mu: f64) {
        let basis: Vec<CMatrix> = (0..BLOCK)
            .map(|p| {
                let mut e = [0.0; BLOCK];
                e[p] = 1.0;
                block_to_matrix(&e)
            })
            .collect();
        for _ in 0..60 {
            let Some((inv, _)) = inverse_and_log_det(&self.slack(z)) else { return };
            let mut grad = self.c.clone();
            let mut hess = DMatrix::<f64>::zeros(z.len(), z.len());
            if let Some(q) = &self.q {
                grad -= q * &*z;
                hess += q;
            }
            for (m_inv, d) in inv.iter().zip(&self.dirs) {
                let p: Vec<CMatrix> = basis.iter().map(|e| m_inv * e).collect();
                let g = DVector::from_iterator(BLOCK, p.iter().map(|x| x.trace().re));
                let h = DMatrix::from_fn(BLOCK, BLOCK, |i, j| (&p[i] * &p[j]).trace().re);
                grad += d.transpose() * g * mu;
                hess += d.transpose() * h * d * mu;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => match hess.svd(true, true).solve(&grad, 1e-14) {
                    Ok(step) => step,
                    Err(_) => return,
                },
            };
            let decrement = step.dot(&grad);
            let current = self.objective(z, mu);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let trial = &*z + &step * t;
                let value = self.objective(&trial, mu);
                if value.is_finite() && value >= current {
                    *z = trial;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved || decrement < 1e-30 {
                return;
            }
        }
    }

    /// Follows the central path from `mu0` down to `mu_min`; `stop` sees each centered point.
    fn follow(&self, mut z: DVector<f64>, mu0: f64, mu_min: f64, mut stop: impl FnMut(&DVector<f64>) -> bool) {
        let mut mu = mu0;
        while mu > mu_min {
            self.center(&mut z, mu);
            if stop(&z) {
                return;
            }
            mu *= 0.1;
        }
    }
}

/// Inverses and total log-determinant of positive definite blocks.
///
/// Definiteness is decided by eigenvalues: nalgebra's complex Cholesky
/// takes complex square roots and so never reports failure.
fn inverse_and_log_det(blocks: &[CMatrix]) -> Option<(Vec<CMatrix>, f64)> {
    let mut log_det = 0.0;
    let mut out = Vec::with_capacity(blocks.len());
    for m in blocks {
        let (values, vectors) = hermitian_eigen(m);
        if !(values[0] > 0.0) {
            return None;
        }
        log_det += values.iter().map(|v| v.ln()).sum::<f64>();
        let inv = DVector::from_iterator(3, values.iter().map(|v| Complex64::new(1.0 / v, 0.0)));
        out.push(&vectors * DMatrix::from_diagonal(&inv) * vectors.adjoint());
    }
    Some((out, log_det))
}

/// Barrier path-following on the dual of the nearest-point problem,
///
/// ```text
/// max −⟨b, y⟩ − ½‖A*y‖²   subject to   A*y ⪰ 0,
/// ```
///
/// whose optimal value is half the squared distance between the affine set
/// and the cone. Iterates keep `A*y` positive definite, so any iterate with
/// `⟨b, y⟩ < 0` is a Farkas certificate; the best verified bound is returned.
fn dual_gap(cons: &Constraints, stop_above: f64) -> f64 {
    let d = cons.d;
    let barrier = Barrier {
        c: -&cons.b,
        q: Some(&cons.a * cons.a.transpose()),
        m0: vec![DVector::zeros(BLOCK); d],
        dirs: (0..d).map(|n| cons.a.columns(BLOCK * n, BLOCK).transpose()).collect(),
    };
    let mut y0 = DVector::<f64>::zeros(9);
    for j in 0..3 {
        y0[j] = 1e-2;
    }
    let mut best = 0.0f64;
    barrier.follow(y0, 1e-3, 1e-24, |y| {
        if let Some(gap) = farkas_bound(cons, y.clone()) {
            best = best.max(gap);
        }
        best > stop_above
    });
    best
}

/// Phase-one barrier: maximize `t` subject to `Γⁿ ⪰ t·I` on the affine set.
/// Returns blocks once `t ≥ −tol/2`, or the best blocks when `t` stalls below.
fn primal_phase_one(cons: &Constraints, tol: f64) -> Option<Vec<CMatrix>> {
    let d = cons.d;
    let x0 = cons.project_affine(&DVector::zeros(BLOCK * d));
    let nullity = BLOCK * d - 9;
    // eigenvectors of the projector onto ker A with eigenvalue 1
    let projector = DMatrix::<f64>::identity(BLOCK * d, BLOCK * d) - &cons.a_pinv * &cons.a;
    let eig = projector.symmetric_eigen();
    let mut order: Vec<usize> = (0..BLOCK * d).collect();
    order.sort_by(|i, j| eig.eigenvalues[*j].total_cmp(&eig.eigenvalues[*i]));
    let null = DMatrix::from_fn(BLOCK * d, nullity, |i, k| eig.eigenvectors[(i, order[k])]);
    let blocks0 = to_blocks(&x0, d);
    let t0 = blocks0.iter().map(|g| hermitian_eigen(g).0[0]).fold(f64::INFINITY, f64::min);
    if nullity == 0 {
        return (t0 >= -tol).then_some(blocks0);
    }
    let mut identity = [0.0; BLOCK];
    identity[..3].fill(-1.0);
    let barrier = Barrier {
        c: DVector::from_fn(nullity + 1, |i, _| if i == nullity { 1.0 } else { 0.0 }),
        q: None,
        m0: (0..d).map(|n| x0.rows(BLOCK * n, BLOCK).into_owned()).collect(),
        dirs: (0..d)
            .map(|n| {
                let mut m = DMatrix::<f64>::zeros(BLOCK, nullity + 1);
                m.columns_mut(0, nullity).copy_from(&null.rows(BLOCK * n, BLOCK));
                m.set_column(nullity, &DVector::from_column_slice(&identity));
                m
            })
            .collect(),
    };
    let mut z0 = DVector::<f64>::zeros(nullity + 1);
    z0[nullity] = t0 - 1.0;
    let mut found = None;
    let scale = 1.0 + t0.abs();
    barrier.follow(z0, scale, 1e-16 * scale, |z| {
        if z[nullity] >= -0.5 * tol {
            found = Some(to_blocks(&(&x0 + &null * z.rows(0, nullity)), d));
            return true;
        }
        false
    });
    found
}

fn is_checkpoint(it: usize) -> bool {
    it <= 3 || it % CHECK_EVERY == 0
}

fn is_polish_point(it: usize) -> bool {
    it == 1 || (it.is_power_of_two() && it >= 16) || it % 2048 == 0
}

/// Decides solvability of `problem` by the Agler certificate.
///
/// `tol` bounds both the equality residual and the negative eigenvalue slack
/// of a FEASIBLE certificate; INFEASIBLE requires a distance bound above
/// `10·tol`. Deterministic: no randomness is involved.
pub fn feasibility(problem: &PickProblem, tol: f64, max_iter: usize) -> FeasibilityOutcome {
    let cons = Constraints::new(problem);
    let d = problem.d();
    let gap = dual_gap(&cons, 10.0 * tol);
    if gap > 10.0 * tol {
        return FeasibilityOutcome { status: FeasibilityStatus::Infeasible { gap }, iterations: 0 };
    }
    if let Some(blocks) = primal_phase_one(&cons, tol) {
        let start = project_psd(&from_blocks(&blocks), d).0;
        let cert = try_polish(&cons, &start, problem, tol)
            .or_else(|| AglerCertificate::new(blocks, problem).ok())
            .filter(|cert| cert.feas_residual <= tol && cert.min_eig >= -tol);
        if let Some(cert) = cert {
            return FeasibilityOutcome { status: FeasibilityStatus::Feasible(cert), iterations: 0 };
        }
    }
    let mut c = DVector::<f64>::zeros(BLOCK * d);
    let mut q = DVector::<f64>::zeros(BLOCK * d);
    let mut distance = f64::INFINITY;
    for it in 1..=max_iter {
        let a = cons.project_affine(&c);
        let shifted = &a + &q;
        let (next, _) = project_psd(&shifted, d);
        q = shifted - &next;
        c = next;
        if !is_checkpoint(it) && !is_polish_point(it) {
            continue;
        }
        let (cone_point, min_eig) = project_psd(&a, d);
        distance = (&cone_point - &a).norm();
        if min_eig >= -tol {
            let cert = try_polish(&cons, &cone_point, problem, tol)
                .or_else(|| AglerCertificate::new(to_blocks(&a, d), problem).ok())
                .filter(|cert| cert.feas_residual <= tol && cert.min_eig >= -tol);
            if let Some(cert) = cert {
                return FeasibilityOutcome { status: FeasibilityStatus::Feasible(cert), iterations: it };
            }
        }
        if is_polish_point(it) {
            if let Some(cert) = try_polish(&cons, &cone_point, problem, tol) {
                return FeasibilityOutcome { status: FeasibilityStatus::Feasible(cert), iterations: it };
            }
        }
        if let Some(gap) = farkas_gap(&cons, &(&cone_point - &a)) {
            if gap > 10.0 * tol {
                return FeasibilityOutcome { status: FeasibilityStatus::Infeasible { gap }, iterations: it };
            }
        }
    }
    FeasibilityOutcome { status: FeasibilityStatus::Indeterminate { distance }, iterations: max_iter }
}

/// One bisection probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleProbe {
    pub r: f64,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremality {
    pub extremal: bool,
    /// Largest certified-feasible scale (the lower end of the final bracket).
    pub r_star: f64,
    pub lo: f64,
    pub hi: f64,
    /// Scale at which the largest target reaches the disc margin.
    pub cap: f64,
    pub probes: Vec<ScaleProbe>,
}

struct Bisection<'a> {
    problem: &'a PickProblem,
    feasible_max: f64,
    infeasible_min: f64,
    probes: Vec<ScaleProbe>,
}

impl Bisection<'_> {
    fn probe(&mut self, r: f64) -> Result<FeasibilityOutcome> {
        let outcome = feasibility(&self.problem.scaled_targets(r)?, FEAS_TOL, MAX_ITER);
        self.probes.push(ScaleProbe { r, status: outcome.label().into() });
        match outcome.status {
            FeasibilityStatus::Feasible(_) => self.feasible_max = self.feasible_max.max(r),
            FeasibilityStatus::Infeasible { .. } => self.infeasible_min = self.infeasible_min.min(r),
            FeasibilityStatus::Indeterminate { .. } => {}
        }
        if self.feasible_max >= self.infeasible_min {
            return Err(Error::Monotonicity { feasible: self.feasible_max, infeasible: self.infeasible_min });
        }
        Ok(outcome)
    }
}

/// Locates `r* = sup{r ≥ 1 : targets scaled by r are solvable}` by bisection,
/// to a bracket of width `tol`.
///
/// Scaling is capped where the largest target would leave the disc. An
/// indeterminate probe is answered by probing the quarter points on both
/// sides; if neither moves the bracket the search stops there, and fails
/// only when the bracket still straddles `1 + tol`.
pub fn extremality(problem: &PickProblem, tol: f64) -> Result<Extremality> {
    let mut search = Bisection { problem, feasible_max: f64::NEG_INFINITY, infeasible_min: f64::INFINITY, probes: vec![] };
    let base = search.probe(1.0)?;
    match base.status {
        FeasibilityStatus::Feasible(_) => {}
        FeasibilityStatus::Infeasible { .. } => {
            return Err(Error::Precondition("the problem itself is not solvable".into()));
        }
        FeasibilityStatus::Indeterminate { .. } => return Err(Error::IndeterminateExtremality { lo: 1.0, hi: 1.0 }),
    }
    let largest = problem.targets().iter().map(|t| t.norm()).fold(0.0, f64::max);
    let cap = if largest > 0.0 { (1.0 - 2.0 * DISC_MARGIN) / largest } else { f64::INFINITY };
    let done = |search: Bisection, lo: f64, hi: f64| Extremality {
        extremal: lo <= 1.0 + tol,
        r_star: lo,
        lo,
        hi,
        cap,
        probes: search.probes,
    };
    if !cap.is_finite() || cap <= 1.0 {
        return Ok(done(search, cap.max(1.0), cap.max(1.0)));
    }
    if search.probe(cap)?.is_feasible() {
        return Ok(done(search, cap, cap));
    }
    let (mut lo, mut hi) = (1.0, cap);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let outcome = search.probe(mid)?;
        match outcome.status {
            FeasibilityStatus::Feasible(_) => lo = mid,
            FeasibilityStatus::Infeasible { .. } => hi = mid,
            FeasibilityStatus::Indeterminate { .. } => {
                let (left, right) = (0.5 * (lo + mid), 0.5 * (mid + hi));
                let mut moved = false;
                if search.probe(left)?.is_feasible() {
                    lo = left;
                    moved = true;
                }
                if search.probe(right)?.is_infeasible() {
                    hi = right;
                    moved = true;
                }
                if !moved {
                    // the verdict survives a wide bracket unless it straddles 1 + tol
                    if lo > 1.0 + tol || hi <= 1.0 + tol {
                        break;
                    }
                    return Err(Error::IndeterminateExtremality { lo, hi });
                }
            }
        }
    }
    Ok(done(search, lo, hi))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ones() -> CMatrix {
        CMatrix::from_element(3, 3, Complex64::new(1.0, 0.0))
    }

    fn identity_problem() -> PickProblem {
        PickProblem::real([&[0.0], &[0.5], &[-0.5]], [0.0, 0.5, -0.5]).unwrap()
    }

    fn worked(targets: [f64; 3]) -> PickProblem {
        PickProblem::real([&[0.0, 0.0], &[0.5, 0.3], &[0.3, 0.2]], targets).unwrap()
    }

    pub(crate) fn random_problem(rng: &mut impl Rng, d: usize, radius: f64) -> PickProblem {
        let mut point = || Complex64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU);
        let nodes = [(); 3].map(|_| (0..d).map(|_| point()).collect::<Vec<_>>());
        let targets = [(); 3].map(|_| point());
        PickProblem::new(nodes, targets).unwrap()
    }

    #[test]
    fn coordinates_round_trip() {
        let g = CMatrix::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
        let back = to_blocks(&from_blocks(&[h.clone()]), 1);
        assert!(max_abs(&(&back[0] - &h)) < 1e-15);
        let x = from_blocks(&[h.clone()]);
        assert!((x.norm() - h.norm()).abs() < 1e-12);
    }

    #[test]
    fn residual_examples() {
        let p = identity_problem();
        let cert = AglerCertificate::new(vec![ones()], &p).unwrap();
        assert!(cert.feas_residual < 1e-15);
        assert!(cert.min_eig.abs() < 1e-14);

        let zero = AglerCertificate::new(vec![CMatrix::zeros(3, 3)], &p).unwrap();
        let (eq, _) = residual(&zero, &p).unwrap();
        assert!((eq - 1.25).abs() < 1e-15, "max |1 − t_j t̄_k| is 1 + 0.25 at (j, k) = (1, 2)");
    }

    #[test]
    fn feasibility_examples() {
        let out = feasibility(&identity_problem(), FEAS_TOL, MAX_ITER);
        let cert = out.certificate().expect("identity problem is feasible");
        assert!(max_abs(&(&cert.gammas[0] - ones())) < 1e-8);

        let schwarz = PickProblem::real([&[0.0], &[0.5], &[-0.5]], [0.0, 0.9, 0.0]).unwrap();
        let out = feasibility(&schwarz, FEAS_TOL, MAX_ITER);
        assert!(matches!(out.status, FeasibilityStatus::Infeasible { gap } if gap > 1e-8));

        let out = feasibility(&worked([0.0, 0.5, 0.3]), FEAS_TOL, MAX_ITER);
        let cert = out.certificate().expect("f = z1 solves it");
        assert!(cert.feas_residual <= FEAS_TOL && cert.min_eig >= -PSD_TOL);
        assert!(max_abs(&(&cert.gammas[0] - ones())) < 1e-6);
        assert!(max_abs(&cert.gammas[1]) < 1e-6);
    }

    #[test]
    fn oracle_examples() {
        assert!(pick_oracle_1d(&identity_problem()).unwrap());
        let zero = PickProblem::real([&[0.0], &[0.5], &[-0.5]], [0.0; 3]).unwrap();
        assert!(pick_oracle_1d(&zero).unwrap());
        let schwarz = PickProblem::real([&[0.0], &[0.5], &[-0.5]], [0.0, 0.9, 0.0]).unwrap();
        assert!(!pick_oracle_1d(&schwarz).unwrap());
        assert!(pick_oracle_1d(&worked([0.0; 3])).is_err());
    }

    #[test]
    fn extremality_examples() {
        let ext = extremality(&worked([0.0, 0.5, 0.3]), 1e-6).unwrap();
        assert!(ext.extremal);
        assert!((ext.r_star - 1.0).abs() <= 1e-6);

        let ext = extremality(&worked([0.0, 0.25, 0.15]), 1e-6).unwrap();
        assert!(!ext.extremal);
        assert!((ext.lo - 2.0).abs() <= 1e-6 && (ext.hi - 2.0).abs() <= 1e-6, "{ext:?}");

        let tiny = PickProblem::real([&[0.0], &[0.5], &[-0.5]], [0.0, 0.5e-3, -0.5e-3]).unwrap();
        // the bracket is absolute, so near r* = 1000 it is asked for 1e-6 relative accuracy
        let ext = extremality(&tiny, 1e-3).unwrap();
        assert!(!ext.extremal);
        assert!((ext.r_star - 1e3).abs() < 1e-3, "{}", ext.r_star);
        assert!(pick_oracle_1d(&tiny.scaled_targets(ext.lo).unwrap()).unwrap());
    }

    #[test]
    fn certificate_json_round_trip() {
        let p = worked([0.0, 0.5, 0.3]);
        let cert = feasibility(&p, FEAS_TOL, MAX_ITER).certificate().cloned().unwrap();
        let text = serde_json::to_string(&cert.to_json()).unwrap();
        let back = AglerCertificate::from_json(&serde_json::from_str(&text).unwrap(), &p).unwrap();
        assert_eq!(back, cert);
    }

    #[test]
    fn solver_output_satisfies_residual_on_random_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut feasible = 0;
        for d in 1..=3 {
            for _ in 0..20 {
                let p = random_problem(&mut rng, d, 0.9).scaled_targets(0.3).unwrap();
                let out = feasibility(&p, FEAS_TOL, MAX_ITER);
                if let Some(cert) = out.certificate() {
                    let (eq, min_eig) = residual(cert, &p).unwrap();
                    assert!(eq <= FEAS_TOL && min_eig >= -PSD_TOL);
                    feasible += 1;
                }
            }
        }
        assert!(feasible > 30);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn rank_reduction_keeps_the_identity(seed in any::<u64>(), d in 1usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = crate::sample::feasible_problem(&mut rng, d);
            let FeasibilityStatus::Feasible(cert) = feasibility(&p, FEAS_TOL, MAX_ITER).status else {
                return Err(TestCaseError::reject("not certified"));
            };
            let reduced = reduce_rank(&cert, &p, 1e-9).unwrap();
            let ranks: usize = reduced
                .gammas
                .iter()
                .map(|g| hermitian_eigen(g).0.iter().filter(|&&v| v > 1e-9).count().pow(2))
                .sum();
            prop_assert!(ranks <= BLOCK);
            prop_assert!(reduced.feas_residual <= 10.0 * FEAS_TOL, "residual {}", reduced.feas_residual);
            prop_assert!(reduced.min_eig >= -1e-12);
        }

        #[test]
        fn agrees_with_pick_oracle(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 1, 0.95);
            let min_eig = hermitian_eigen(&pick_matrix_1d(&p).unwrap()).0[0];
            prop_assume!(min_eig.abs() > 1e-6);
            let out = feasibility(&p, FEAS_TOL, MAX_ITER);
            prop_assert_eq!(out.is_feasible(), pick_oracle_1d(&p).unwrap());
            prop_assert_eq!(out.is_infeasible(), !pick_oracle_1d(&p).unwrap());
        }

        #[test]
        fn feasibility_is_monotone_in_scale(seed in any::<u64>(), r1 in 0.1f64..1.0, r2 in 0.1f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 2, 0.9);
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let high = feasibility(&p.scaled_targets(hi).unwrap(), FEAS_TOL, MAX_ITER);
            let low = feasibility(&p.scaled_targets(lo).unwrap(), FEAS_TOL, MAX_ITER);
            prop_assert!(!(high.is_feasible() && low.is_infeasible()));
        }
    }
}
