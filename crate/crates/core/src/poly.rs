//! Multivariate complex polynomials: evaluation at points and at commuting
//! matrix tuples, and a two-sided bound on the supremum over the torus.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::ZERO;
use crate::error::{Error, Result};
use crate::matrix::{operator_norm, CMatrix, MatrixTuple};

/// Largest number of torus grid points a single scan may visit.
pub const GRID_BUDGET: f64 = 1e8;
/// Coordinate-ascent iterations applied after the grid scan.
pub const DEFAULT_REFINE_ITERS: usize = 30;
const REFINE_STARTS: usize = 16;

/// Default torus grid resolution per coordinate for `d` variables.
pub fn default_grid(d: usize) -> usize {
    match d {
        0..=2 => 128,
        3 => 48,
        4 => 24,
        _ => 12,
    }
}

/// A polynomial in `d` variables; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPoly {
    d: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl MultiPoly {
    /// Collects `(exponent, coefficient)` pairs, summing repeated exponents.
    pub fn new(d: usize, terms: impl IntoIterator<Item = (Vec<u32>, Complex64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::Input("a polynomial needs at least one variable".into()));
        }
        let mut map = BTreeMap::new();
        for (exp, coef) in terms {
            if exp.len() != d {
                return Err(Error::Input(format!("exponent {exp:?} does not have length {d}")));
            }
            if !coef.is_finite() {
                return Err(Error::Input(format!("coefficient {coef} is not finite")));
            }
            *map.entry(exp).or_insert(ZERO) += coef;
        }
        map.retain(|_, c| *c != ZERO);
        Ok(Self { d, terms: map })
    }

    /// The coordinate function `z_j` (zero-based `j`).
    pub fn coordinate(d: usize, j: usize) -> Result<Self> {
        let mut exp = vec![0; d];
        *exp.get_mut(j).ok_or_else(|| Error::Input(format!("no coordinate {j} in dimension {d}")))? = 1;
        Self::new(d, [(exp, Complex64::new(1.0, 0.0))])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], Complex64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Highest power of each variable.
    pub fn degrees(&self) -> Vec<u32> {
        let mut out = vec![0; self.d];
        for e in self.terms.keys() {
            for (o, k) in out.iter_mut().zip(e) {
                *o = (*o).max(*k);
            }
        }
        out
    }

    pub fn coefficient_l1(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    /// `Σ |c_α| · |α|`, a Lipschitz constant of `θ ↦ p(e^{iθ})` in the ℓ∞ angle metric.
    pub fn lipschitz_constant(&self) -> f64 {
        self.terms.iter().map(|(e, c)| c.norm() * e.iter().sum::<u32>() as f64).sum()
    }

    pub fn mul(&self, other: &MultiPoly) -> Result<MultiPoly> {
        if self.d != other.d {
            return Err(Error::Input("polynomials have different numbers of variables".into()));
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                terms.push((a.iter().zip(b).map(|(x, y)| x + y).collect(), ca * cb));
            }
        }
        MultiPoly::new(self.d, terms)
    }

    /// Terms in graded-lex order (total degree, then lexicographic).
    fn graded_terms(&self) -> Vec<(&Vec<u32>, Complex64)> {
        let mut terms: Vec<_> = self.terms.iter().map(|(e, c)| (e, *c)).collect();
        terms.sort_by(|(a, _), (b, _)| {
            a.iter().sum::<u32>().cmp(&b.iter().sum::<u32>()).then_with(|| a.cmp(b))
        });
        terms
    }

    pub fn to_json(&self) -> PolyJson {
        PolyJson {
            d: self.d,
            terms: self.graded_terms().into_iter().map(|(exp, coef)| PolyTerm { exp: exp.clone(), coef }).collect(),
        }
    }

    pub fn from_json(json: &PolyJson) -> Result<Self> {
        Self::new(json.d, json.terms.iter().map(|t| (t.exp.clone(), t.coef)))
    }
}

/// `{"d": int, "terms": [{"exp": [int,...], "coef": [re,im]}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub d: usize,
    pub terms: Vec<PolyTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub exp: Vec<u32>,
    pub coef: Complex64,
}

/// Nested Horner evaluation, one variable at a time.
pub fn eval_point(p: &MultiPoly, z: &[Complex64]) -> Result<Complex64> {
    if z.len() != p.d {
        return Err(Error::Input(format!("point has {} coordinates, polynomial has {} variables", z.len(), p.d)));
    }
    let terms: Vec<(&[u32], Complex64)> = p.terms().collect();
    Ok(horner(&terms, 0, z))
}

// `terms` are sorted lexicographically, so equal powers of `z[var]` are contiguous.
fn horner(terms: &[(&[u32], Complex64)], var: usize, z: &[Complex64]) -> Complex64 {
    if terms.is_empty() {
        return ZERO;
    }
    if var == z.len() {
        return terms.iter().map(|(_, c)| c).sum();
    }
    let mut acc = ZERO;
    let mut end = terms.len();
    let mut power = terms[end - 1].0[var];
    loop {
        let start = terms[..end].partition_point(|(e, _)| e[var] < power);
        let inner = horner(&terms[start..end], var + 1, z);
        let next = if start == 0 { 0 } else { terms[start - 1].0[var] };
        acc = acc + inner;
        // multiply through the gap between this power and the next one down
        for _ in next..power {
            acc *= z[var];
        }
        if start == 0 {
            break;
        }
        end = start;
        power = next;
    }
    acc
}

/// `p(T)` for a commuting tuple, summing monomials in graded-lex order with
/// cached powers of each matrix.
pub fn eval_tuple(p: &MultiPoly, t: &MatrixTuple) -> Result<CMatrix> {
    if t.d() != p.d {
        return Err(Error::Input(format!("tuple has {} matrices, polynomial has {} variables", t.d(), p.d)));
    }
    t.require_commuting()?;
    Ok(eval_tuple_unchecked(p, t.matrices()))
}

pub(crate) fn eval_tuple_unchecked(p: &MultiPoly, matrices: &[CMatrix]) -> CMatrix {
    let n = matrices[0].nrows();
    let powers: Vec<Vec<CMatrix>> = matrices
        .iter()
        .zip(p.degrees())
        .map(|(m, deg)| {
            let mut list = vec![CMatrix::identity(n, n)];
            for k in 1..=deg as usize {
                let next = &list[k - 1] * m;
                list.push(next);
            }
            list
        })
        .collect();
    let mut out = CMatrix::zeros(n, n);
    for (exp, coef) in p.graded_terms() {
        let mut term = CMatrix::identity(n, n);
        for (var, k) in exp.iter().enumerate() {
            if *k > 0 {
                term = term * &powers[var][*k as usize];
            }
        }
        out += term * coef;
    }
    out
}

/// Bounds on `sup_{z ∈ 𝕋ᵈ} |p(z)|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusSup {
    /// Attained value of `|p|` at `argmax`.
    pub lower: f64,
    /// Guaranteed upper bound.
    pub upper: f64,
    /// Angles of the best point found.
    pub argmax: Vec<f64>,
}

fn eval_angles(p: &MultiPoly, angles: &[f64]) -> f64 {
    let z: Vec<Complex64> = angles.iter().map(|t| Complex64::from_polar(1.0, *t)).collect();
    let terms: Vec<(&[u32], Complex64)> = p.terms().collect();
    horner(&terms, 0, &z).norm()
}

/// Grid scan of `|p|` over `grid_n^d` equally spaced torus points followed by
/// coordinate ascent from the best grid points.
///
/// `lower` is a value of `|p|` actually attained on the torus. `upper` adds the
/// Lipschitz slack `L·h/2` (`h` the grid spacing, `L = Σ|c_α||α|`) to the grid
/// maximum and is capped by the coefficient 1-norm.
pub fn torus_sup(p: &MultiPoly, grid_n: usize, refine_iters: usize) -> Result<TorusSup> {
    let d = p.d;
    if grid_n == 0 {
        return Err(Error::Input("grid resolution must be positive".into()));
    }
    let points = (grid_n as f64).powi(d as i32);
    if points > GRID_BUDGET {
        return Err(Error::Budget { points, cap: GRID_BUDGET });
    }
    if p.is_zero() {
        return Ok(TorusSup { lower: 0.0, upper: 0.0, argmax: vec![0.0; d] });
    }

    // z^α on the grid is ω^{(α·k) mod N}
    let roots: Vec<Complex64> = (0..grid_n).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / grid_n as f64)).collect();
    let terms: Vec<(Vec<usize>, Complex64)> =
        p.terms().map(|(e, c)| (e.iter().map(|k| *k as usize % grid_n).collect(), c)).collect();
    let total = points as usize;
    let mut top: Vec<(f64, usize)> = Vec::with_capacity(REFINE_STARTS + 1);
    let mut index = vec![0usize; d];
    for flat in 0..total {
        let value: Complex64 = terms
            .iter()
            .map(|(e, c)| {
                let phase = e.iter().zip(&index).map(|(a, k)| a * k).sum::<usize>() % grid_n;
                c * roots[phase]
            })
            .sum();
        let modulus = value.norm();
        if top.len() < REFINE_STARTS || modulus > top[top.len() - 1].0 {
            let pos = top.partition_point(|(m, _)| *m >= modulus);
            top.insert(pos, (modulus, flat));
            top.truncate(REFINE_STARTS);
        }
        for k in index.iter_mut() {
            *k += 1;
            if *k < grid_n {
                break;
            }
            *k = 0;
        }
    }

    let spacing = TAU / grid_n as f64;
    let grid_max = top[0].0;
    let unflatten = |mut flat: usize| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let k = flat % grid_n;
                flat /= grid_n;
                spacing * k as f64
            })
            .collect()
    };
    let mut best = (grid_max, unflatten(top[0].1));
    for (value, flat) in &top {
        let (v, angles) = coordinate_ascent(p, unflatten(*flat), *value, spacing / 2.0, refine_iters);
        if v > best.0 {
            best = (v, angles);
        }
    }
    let upper = (grid_max + p.lipschitz_constant() * spacing / 2.0).min(p.coefficient_l1()).max(best.0);
    Ok(TorusSup { lower: best.0, upper, argmax: best.1 })
}

fn coordinate_ascent(p: &MultiPoly, mut angles: Vec<f64>, mut value: f64, mut step: f64, iters: usize) -> (f64, Vec<f64>) {
    for _ in 0..iters {
        for var in 0..angles.len() {
            for direction in [1.0, -1.0] {
                for _ in 0..4 {
                    let old = angles[var];
                    angles[var] = old + direction * step;
                    let candidate = eval_angles(p, &angles);
                    if candidate > value {
                        value = candidate;
                    } else {
                        angles[var] = old;
                        break;
                    }
                }
            }
        }
        step *= 0.5;
    }
    (value, angles)
}

/// `‖p(T)‖` against the torus supremum of `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VnRatio {
    /// `‖p(T)‖ / sup.lower`.
    pub ratio: f64,
    pub norm: f64,
    pub sup: TorusSup,
}

impl VnRatio {
    /// True when `‖p(T)‖` exceeds even the upper bound of the supremum by more than `tol`.
    pub fn is_violation(&self, tol: f64) -> bool {
        self.ratio > 1.0 + tol && self.norm > self.sup.upper * (1.0 + tol)
    }
}

/// Von Neumann ratio `‖p(T)‖ / sup_𝕋ᵈ |p|` of a commuting contractive tuple.
pub fn vn_ratio(p: &MultiPoly, t: &MatrixTuple, grid_n: usize) -> Result<VnRatio> {
    if p.is_zero() {
        return Err(Error::UndefinedRatio("the zero polynomial has zero supremum".into()));
    }
    let value = eval_tuple(p, t)?;
    if t.max_norm() > 1.0 + 1e-12 {
        return Err(Error::Precondition("tuple is not contractive".into()));
    }
    let sup = torus_sup(p, grid_n, DEFAULT_REFINE_ITERS)?;
    if sup.lower <= 0.0 {
        return Err(Error::UndefinedRatio("no torus point with nonzero value was found".into()));
    }
    let norm = operator_norm(&value);
    Ok(VnRatio { ratio: norm / sup.lower, norm, sup })
}
