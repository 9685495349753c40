//! Certified von Neumann bounds for commuting 3×3 tuples, and a randomized
//! search over commuting tuples of other sizes.
//!
//! For a tuple `T` and a polynomial `p`, the certifier interpolates
//! `p(λ_i)/s` at the three joint eigenvalues `λ_i` by a Schur–Agler function
//! `f` (a realized Agler certificate). Since `T` is 3×3 and diagonalizable,
//! `s·f(T) = p(T)`, and `‖f(T)‖ ≤ 1` then bounds `‖p(T)‖` by `s`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agler::{feasibility, AglerCertificate, CertificateJson, FeasibilityStatus, FEAS_TOL, MAX_ITER};
use crate::error::{Error, Result};
use crate::matrix::{
    commutation_residual, joint_spectrum, make_strict, JointSpectrum, operator_norm, perturb_to_diagonalizable, CMatrix, MatrixTuple,
    MatrixTupleJson,
};
use crate::pick::{normalize, Normalization, PickProblem, PickProblemJson};
use crate::poly::{default_grid, eval_point, eval_tuple, torus_sup, vn_ratio, MultiPoly, PolyJson, TorusSup, DEFAULT_REFINE_ITERS};
use crate::realization::{build_colligation, tf_eval_tuple, Colligation, ColligationJson};
use crate::sample;

/// Tuples with a norm at or above this are scaled by `strict_factor` first.
const STRICT_THRESHOLD: f64 = 1.0 - 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    /// Size of the perturbation towards a diagonalizable tuple.
    pub epsilon: f64,
    /// The perturbation grows tenfold up to this while the realization of a
    /// near-coincident spectrum stays too ill-conditioned to pass its checks.
    pub epsilon_max: f64,
    pub strict_factor: f64,
    pub shrink_start: f64,
    pub shrink_max: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Torus grid per coordinate; `None` picks [`default_grid`].
    pub grid: Option<usize>,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            epsilon_max: 1e-4,
            strict_factor: 1.0 - 1e-6,
            shrink_start: 1e-7,
            shrink_max: 1e-3,
            feas_tol: FEAS_TOL,
            max_iter: MAX_ITER,
            grid: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `max_m ‖T′_m − T_m‖` between the input and the tuple actually certified.
    pub perturbation_distance: f64,
    pub scaled_to_strict: bool,
    pub perturbed: bool,
    /// The perturbation size used; zero when the tuple was not perturbed.
    pub epsilon: f64,
    pub spectrum_residual: f64,
    pub joint_eigenvalues: Vec<Vec<Complex64>>,
    pub sup: TorusSup,
    /// Whether `f` was realized for the normalized problem and pulled back.
    pub normalized: bool,
    pub feasibility_iterations: usize,
}

/// A certified bound `‖p(T)‖ ≤ s` with its witnesses.
#[derive(Clone, Debug, PartialEq)]
pub struct CertifiedBound {
    /// `‖p(T)‖ / torus_sup.lower` for the input tuple.
    pub ratio: f64,
    /// The normalizing constant `s ≥ torus_sup.lower`.
    pub scale: f64,
    pub shrink: f64,
    /// The problem the certificate solves (normalized when `diagnostics.normalized`).
    pub problem: PickProblem,
    pub certificate: AglerCertificate,
    pub colligation: Colligation,
    /// `‖s·f(T′)/(1 − shrink) − p(T′)‖` on the certified tuple `T′`.
    pub reconstruction_residual: f64,
    pub norm_of_ft: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifiedBoundJson {
    pub ratio: f64,
    pub scale: f64,
    pub shrink: f64,
    pub problem: PickProblemJson,
    pub certificate: CertificateJson,
    pub colligation: ColligationJson,
    pub reconstruction_residual: f64,
    pub norm_of_ft: f64,
    pub diagnostics: Diagnostics,
}

impl CertifiedBound {
    pub fn to_json(&self) -> CertifiedBoundJson {
        CertifiedBoundJson {
            ratio: self.ratio,
            scale: self.scale,
            shrink: self.shrink,
            problem: self.problem.to_json(),
            certificate: self.certificate.to_json(),
            colligation: self.colligation.to_json(),
            reconstruction_residual: self.reconstruction_residual,
            norm_of_ft: self.norm_of_ft,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Parses and re-validates the certificate and the colligation.
    pub fn from_json(json: &CertifiedBoundJson) -> Result<Self> {
        let problem = PickProblem::from_json(&json.problem)?;
        let certificate = AglerCertificate::from_json(&json.certificate, &problem)?;
        Ok(Self {
            ratio: json.ratio,
            scale: json.scale,
            shrink: json.shrink,
            colligation: Colligation::from_json(&json.colligation)?,
            certificate,
            problem,
            reconstruction_residual: json.reconstruction_residual,
            norm_of_ft: json.norm_of_ft,
            diagnostics: json.diagnostics.clone(),
        })
    }
}

/// Infeasibility where the theorem promises feasibility; never silently accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationCandidate {
    pub problem: PickProblemJson,
    pub gap: f64,
    pub shrink: f64,
    pub scale: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VnOutcome {
    Certified(Box<CertifiedBound>),
    TheoremViolationCandidate(Box<ViolationCandidate>),
}

impl VnOutcome {
    pub fn certified(&self) -> Option<&CertifiedBound> {
        match self {
            VnOutcome::Certified(b) => Some(b),
            VnOutcome::TheoremViolationCandidate(_) => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            VnOutcome::Certified(b) => serde_json::json!({ "status": "CERTIFIED", "bound": b.to_json() }),
            VnOutcome::TheoremViolationCandidate(v) => {
                serde_json::json!({ "status": "THEOREM_VIOLATION_CANDIDATE", "candidate": v })
            }
        }
    }
}

/// Scales a tuple whose largest norm reached `STRICT_THRESHOLD` back below it.
fn strictify(t: &MatrixTuple, factor: f64) -> Result<(MatrixTuple, bool)> {
    let norm = t.max_norm();
    if norm < STRICT_THRESHOLD {
        return Ok((t.clone(), false));
    }
    Ok((make_strict(t, factor / norm.max(1.0))?, true))
}

/// `f(T)` for `f = ψ⁻¹ ∘ g ∘ φ`, applying the automorphisms coordinatewise.
fn pulled_back_eval(col: &Colligation, norm: &Normalization, t: &MatrixTuple) -> Result<CMatrix> {
    let moved: Vec<CMatrix> =
        norm.node_maps.iter().zip(t.matrices()).map(|(m, x)| m.eval_matrix(x)).collect::<Result<_>>()?;
    let inner = tf_eval_tuple(col, &MatrixTuple::new(moved)?.with_comm_tol(t.comm_tol() * 10.0))?;
    norm.target_map.inverse().eval_matrix(&inner)
}

/// Certifies `‖p(T)‖ ≤ sup_𝕋ᵈ |p|` for a commuting contractive 3×3 tuple.
pub fn certify_vn(t: &MatrixTuple, p: &MultiPoly, config: &CertifyConfig) -> Result<VnOutcome> {
    if t.n() != 3 {
        return Err(Error::Precondition(format!("certification needs 3×3 matrices, got {}×{}", t.n(), t.n())));
    }
    if t.d() != p.d() {
        return Err(Error::Input(format!("tuple has {} matrices but p has {} variables", t.d(), p.d())));
    }
    t.require_commuting()?;
    if t.max_norm() > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("tuple is not contractive (norm {})", t.max_norm())));
    }
    if p.is_zero() {
        return Err(Error::UndefinedRatio("the zero polynomial has zero supremum".into()));
    }

    let (strict, scaled_to_strict) = strictify(t, config.strict_factor).map_err(Error::at_stage("strict"))?;
    let spectrum = joint_spectrum(&strict, config.seed).map_err(Error::at_stage("spectrum"))?;
    let prepared = Prepared { strict, scaled_to_strict, spectrum };
    let mut epsilon = config.epsilon;
    loop {
        match certify_with(t, p, config, &prepared, epsilon) {
            Err(Error::Pipeline { stage: "realize", source })
                if !prepared.spectrum.diagonalizable
                    && matches!(*source, Error::InconsistentCertificate { .. } | Error::RankAmbiguity { .. })
                    && epsilon * 10.0 <= config.epsilon_max * (1.0 + 1e-9) =>
            {
                epsilon *= 10.0;
            }
            other => return other,
        }
    }
}

struct Prepared {
    strict: MatrixTuple,
    scaled_to_strict: bool,
    spectrum: JointSpectrum,
}

fn certify_with(
    t: &MatrixTuple,
    p: &MultiPoly,
    config: &CertifyConfig,
    prepared: &Prepared,
    epsilon: f64,
) -> Result<VnOutcome> {
    let Prepared { strict, scaled_to_strict, .. } = prepared;
    let scaled_to_strict = *scaled_to_strict;
    let mut spectrum = prepared.spectrum.clone();
    let mut work = strict.clone();
    let perturbed = !spectrum.diagonalizable;
    if perturbed {
        let moved =
            perturb_to_diagonalizable(strict, epsilon, config.seed).map_err(Error::at_stage("perturb"))?;
        work = strictify(&moved, config.strict_factor).map_err(Error::at_stage("perturb"))?.0;
        spectrum = joint_spectrum(&work, config.seed).map_err(Error::at_stage("spectrum"))?;
        if !spectrum.diagonalizable {
            return Err(Error::Pipeline {
                stage: "perturb",
                source: Box::new(Error::PerturbationFailure {
                    distance: t.distance(&work),
                    commutator: commutation_residual(&work),
                }),
            });
        }
    }

    let grid = config.grid.unwrap_or_else(|| default_grid(p.d()));
    let sup = torus_sup(p, grid, DEFAULT_REFINE_ITERS).map_err(Error::at_stage("sup"))?;
    if sup.lower <= 0.0 {
        return Err(Error::UndefinedRatio("no torus point with nonzero value was found".into()));
    }
    let nodes: [Vec<Complex64>; 3] =
        spectrum.eigenvalues.clone().try_into().map_err(|_| Error::Internal("expected three joint eigenvalues".into()))?;
    let mut values = [Complex64::new(0.0, 0.0); 3];
    for (v, z) in values.iter_mut().zip(&nodes) {
        *v = eval_point(p, z)?;
    }
    // the maximum principle puts |p(λ)| below the true supremum; only grid error can lift it above `lower`
    let scale = values.iter().map(|v| v.norm()).fold(sup.lower, f64::max);
    let p_norm = operator_norm(&eval_tuple(p, t)?);
    let mut diagnostics = Diagnostics {
        perturbation_distance: t.distance(&work),
        scaled_to_strict,
        perturbed,
        epsilon: if perturbed { epsilon } else { 0.0 },
        spectrum_residual: spectrum.residual,
        joint_eigenvalues: spectrum.eigenvalues.clone(),
        sup,
        normalized: true,
        feasibility_iterations: 0,
    };

    let mut shrink = config.shrink_start;
    loop {
        let targets = values.map(|v| v * ((1.0 - shrink) / scale));
        let problem = PickProblem::new(nodes.clone(), targets).map_err(Error::at_stage("targets"))?;
        let (normalized, norm) = normalize(&problem);
        let outcome = feasibility(&normalized, config.feas_tol, config.max_iter);
        diagnostics.feasibility_iterations += outcome.iterations;
        match outcome.status {
            FeasibilityStatus::Feasible(cert) => {
                let col = build_colligation(&cert, &normalized).map_err(Error::at_stage("realize"))?;
                let (problem, cert, col, ft) = match pulled_back_eval(&col, &norm, &work) {
                    Ok(ft) => (normalized, cert, col, ft),
                    // φ(T) can lose strictness to rounding; certify the problem as posed instead
                    Err(Error::Precondition(_)) => {
                        diagnostics.normalized = false;
                        let FeasibilityStatus::Feasible(cert) =
                            feasibility(&problem, config.feas_tol, config.max_iter).status
                        else {
                            return Err(Error::Pipeline {
                                stage: "feasibility",
                                source: Box::new(Error::Internal("normalized and original problems disagree".into())),
                            });
                        };
                        let col = build_colligation(&cert, &problem).map_err(Error::at_stage("realize"))?;
                        let ft = tf_eval_tuple(&col, &work).map_err(Error::at_stage("evaluate"))?;
                        (problem, cert, col, ft)
                    }
                    Err(e) => return Err(Error::at_stage("evaluate")(e)),
                };
                let p_work = eval_tuple(p, &work)?;
                let reconstruction_residual =
                    operator_norm(&(&ft * Complex64::new(scale / (1.0 - shrink), 0.0) - p_work));
                return Ok(VnOutcome::Certified(Box::new(CertifiedBound {
                    ratio: p_norm / diagnostics.sup.lower,
                    scale,
                    shrink,
                    problem,
                    certificate: cert,
                    colligation: col,
                    reconstruction_residual,
                    norm_of_ft: operator_norm(&ft),
                    diagnostics,
                })));
            }
            FeasibilityStatus::Infeasible { gap } => {
                return Ok(VnOutcome::TheoremViolationCandidate(Box::new(ViolationCandidate {
                    problem: normalized.to_json(),
                    gap,
                    shrink,
                    scale,
                    diagnostics,
                })));
            }
            FeasibilityStatus::Indeterminate { distance } => {
                if shrink * 10.0 > config.shrink_max * (1.0 + 1e-9) {
                    return Err(Error::Pipeline {
                        stage: "feasibility",
                        source: Box::new(Error::Internal(format!(
                            "still indeterminate at shrink {shrink:e} (distance {distance:e})"
                        ))),
                    });
                }
                shrink *= 10.0;
            }
        }
    }
}

/// Upper edges of the ratio histogram bins; a final bin collects the rest.
pub const HISTOGRAM_EDGES: [f64; 5] = [0.5, 0.9, 0.99, 0.999_999, 1.0 + 1e-6];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub sizes: Vec<usize>,
    pub d: usize,
    pub trials: usize,
    pub max_degree: u32,
    pub seed: u64,
    pub grid: Option<usize>,
    /// Worker threads; 0 runs sequentially. Results do not depend on it.
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: usize,
    pub ratio: f64,
    pub tuple: MatrixTupleJson,
    pub poly: PolyJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeHistogram {
    pub trials: usize,
    pub max_ratio: f64,
    /// Counts per bin of [`HISTOGRAM_EDGES`] plus an overflow bin.
    pub bins: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub trials: usize,
    /// Draws that produced no usable tuple or an undefined ratio.
    pub skipped: usize,
    pub max_ratio: f64,
    pub witness: Option<Witness>,
    pub histogram: BTreeMap<usize, SizeHistogram>,
}

impl SearchReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_ratio <= 1.0 + tol
    }
}

/// Deterministic per-trial seed.
fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Trial {
    size: usize,
    outcome: Option<(f64, MatrixTuple, MultiPoly)>,
}

fn run_trial(config: &SearchConfig, index: usize) -> Trial {
    let size = config.sizes[index % config.sizes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, index));
    let radius = rng.random_range(0.5..STRICT_THRESHOLD);
    let tuple = if (index / config.sizes.len()) % 2 == 0 {
        Some(sample::polynomial_family(&mut rng, size, config.d, radius))
    } else {
        sample::triangular_family(&mut rng, size, config.d, radius)
    };
    let degree = rng.random_range(1..=config.max_degree);
    let poly = sample::poly(&mut rng, config.d, degree);
    let grid = config.grid.unwrap_or_else(|| default_grid(config.d));
    let outcome = tuple.and_then(|t| vn_ratio(&poly, &t, grid).ok().map(|r| (r.ratio, t, poly)));
    Trial { size, outcome }
}

/// Random commuting tuples against random polynomials, alternating between
/// polynomials in one matrix and simultaneously triangular tuples.
pub fn random_search(config: &SearchConfig) -> Result<SearchReport> {
    if config.sizes.is_empty() || config.sizes.contains(&0) || config.d == 0 || config.trials == 0 || config.max_degree == 0 {
        return Err(Error::Input("sizes, dimension, trials and degree must all be positive".into()));
    }
    let results: Vec<Trial> = if config.threads <= 1 {
        (0..config.trials).map(|i| run_trial(config, i)).collect()
    } else {
        let workers = config.threads.min(config.trials);
        let mut slots: Vec<Option<Trial>> = (0..config.trials).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        (w..config.trials).step_by(workers).map(|i| (i, run_trial(config, i))).collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (i, trial) in h.join().expect("search worker panicked") {
                    slots[i] = Some(trial);
                }
            }
        });
        slots.into_iter().map(|s| s.expect("every trial ran")).collect()
    };

    let mut report =
        SearchReport { trials: config.trials, skipped: 0, max_ratio: 0.0, witness: None, histogram: BTreeMap::new() };
    for (index, trial) in results.into_iter().enumerate() {
        let hist = report.histogram.entry(trial.size).or_insert_with(|| SizeHistogram {
            trials: 0,
            max_ratio: 0.0,
            bins: vec![0; HISTOGRAM_EDGES.len() + 1],
        });
        hist.trials += 1;
        let Some((ratio, tuple, poly)) = trial.outcome else {
            report.skipped += 1;
            continue;
        };
        hist.max_ratio = hist.max_ratio.max(ratio);
        hist.bins[HISTOGRAM_EDGES.iter().position(|e| ratio <= *e).unwrap_or(HISTOGRAM_EDGES.len())] += 1;
        if report.witness.is_none() || ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.witness = Some(Witness { trial: index, ratio, tuple: tuple.to_json(), poly: poly.to_json() });
        }
    }
    Ok(report)
}

/// Thread count from `POLYPICK_THREADS` (0, the default, means sequential).
pub fn threads_from_env() -> usize {
    std::env::var("POLYPICK_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::{ONE, ZERO};
    use crate::matrix::max_abs;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn diag(values: [Complex64; 3]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_row_slice(&values))
    }

    fn jordan() -> CMatrix {
        CMatrix::from_fn(3, 3, |i, j| if j == i + 1 { ONE } else { ZERO })
    }

    fn certified(t: &MatrixTuple, p: &MultiPoly) -> CertifiedBound {
        match certify_vn(t, p, &CertifyConfig::default()).unwrap() {
            VnOutcome::Certified(b) => *b,
            VnOutcome::TheoremViolationCandidate(v) => panic!("violation candidate: {v:?}"),
        }
    }

    #[test]
    fn repeated_joint_eigenvalue_is_certified() {
        // one joint eigenvalue of multiplicity three: the perturbed nodes
        // nearly coincide
        let n = jordan();
        let n2 = &n * &n;
        let i3 = CMatrix::identity(3, 3);
        let t = MatrixTuple::new(vec![
            &i3 * c(0.3, 0.0) + &n * c(0.3, 0.0),
            &i3 * c(-0.2, 0.1) + &n2 * c(0.4, 0.0),
            &i3 * c(0.0, 0.4) + &n * c(0.2, 0.0) + &n2 * c(0.1, 0.0),
        ])
        .unwrap();
        let p = MultiPoly::new(
            3,
            [(vec![1, 0, 0], ONE), (vec![0, 1, 1], c(0.5, -0.5)), (vec![2, 0, 1], c(0.3, 0.0)), (vec![0, 0, 0], c(0.1, 0.0))],
        )
        .unwrap();
        let b = certified(&t, &p);
        assert!(b.diagnostics.perturbed);
        assert!(b.diagnostics.epsilon >= 1e-6 && b.diagnostics.epsilon <= 1e-4);
        assert!(b.norm_of_ft <= 1.0 + 1e-8);
        assert!(b.ratio <= 1.0 + 1e-6);
    }

    #[test]
    fn diagonal_tuple_is_certified_exactly() {
        let t = MatrixTuple::new(vec![
            diag([ZERO, c(0.5, 0.1), c(-0.3, 0.2)]),
            diag([ZERO, c(0.2, -0.6), c(0.4, 0.4)]),
        ])
        .unwrap();
        let p = MultiPoly::new(2, [(vec![1, 0], ONE), (vec![1, 1], c(0.5, 0.0)), (vec![0, 2], c(0.0, -0.7))]).unwrap();
        let b = certified(&t, &p);
        assert!(!b.diagnostics.perturbed);
        assert!(b.ratio <= 1.0);
        assert!(b.reconstruction_residual < 1e-8, "{}", b.reconstruction_residual);
        assert!(b.norm_of_ft <= 1.0 + 1e-8);
    }

    #[test]
    fn nilpotent_family_is_perturbed_and_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let lambdas: Vec<Complex64> = (0..3).map(|_| sample::disc_point(&mut rng, 0.9)).collect();
            let t = MatrixTuple::new(lambdas.iter().map(|l| jordan() * *l).collect()).unwrap();
            let p = sample::poly(&mut rng, 3, 3);
            let b = certified(&t, &p);
            assert!(b.diagnostics.perturbed);
            assert!(b.diagnostics.perturbation_distance <= 1e-6 + 1e-12);
            assert!(b.ratio <= 1.0 + 1e-6);
            assert!(b.norm_of_ft <= 1.0 + 1e-8);
        }
    }

    #[test]
    fn diagonalizable_triples_have_consistent_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..6 {
            let t = sample::diagonalizable_family(&mut rng, 3, 3, 0.95);
            let p = sample::poly(&mut rng, 3, 4);
            let b = certified(&t, &p);
            assert!(b.norm_of_ft <= 1.0 + 1e-9);
            assert!(b.ratio <= 1.0 + 1e-6);
            assert!(b.reconstruction_residual <= 1e-6 * b.scale, "{}", b.reconstruction_residual);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let t4 = MatrixTuple::new(vec![CMatrix::zeros(4, 4)]).unwrap();
        let p1 = MultiPoly::coordinate(1, 0).unwrap();
        assert!(matches!(certify_vn(&t4, &p1, &CertifyConfig::default()), Err(Error::Precondition(_))));
        let big = MatrixTuple::new(vec![CMatrix::identity(3, 3) * c(1.5, 0.0)]).unwrap();
        assert!(matches!(certify_vn(&big, &p1, &CertifyConfig::default()), Err(Error::Precondition(_))));
        let zero = MultiPoly::new(1, []).unwrap();
        let small = MatrixTuple::new(vec![CMatrix::identity(3, 3) * c(0.5, 0.0)]).unwrap();
        assert!(matches!(certify_vn(&small, &zero, &CertifyConfig::default()), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn unitary_input_is_scaled_to_strict() {
        let t = MatrixTuple::new(vec![diag([ONE, c(0.0, 1.0), c(-1.0, 0.0)])]).unwrap();
        let p = MultiPoly::new(1, [(vec![2], ONE), (vec![0], c(0.3, 0.0))]).unwrap();
        let b = certified(&t, &p);
        assert!(b.diagnostics.scaled_to_strict);
        assert!(b.ratio <= 1.0 + 1e-6);
    }

    #[test]
    fn bound_json_round_trip() {
        let t = MatrixTuple::new(vec![diag([ZERO, c(0.5, 0.0), c(0.0, 0.5)])]).unwrap();
        let b = certified(&t, &MultiPoly::coordinate(1, 0).unwrap());
        let text = serde_json::to_string(&b.to_json()).unwrap();
        let back = CertifiedBound::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn search_examples() {
        let config =
            |sizes: Vec<usize>| SearchConfig { sizes, d: 3, trials: 60, max_degree: 3, seed: 4, grid: None, threads: 0 };
        for sizes in [vec![1], vec![2], vec![3]] {
            let report = random_search(&config(sizes)).unwrap();
            assert!(report.holds(1e-6), "{}", report.max_ratio);
            let w = report.witness.as_ref().unwrap();
            let t = MatrixTuple::from_json(&w.tuple).unwrap();
            let p = MultiPoly::from_json(&w.poly).unwrap();
            let again = vn_ratio(&p, &t, default_grid(3)).unwrap().ratio;
            assert!((again - report.max_ratio).abs() <= 1e-9);
        }
    }

    #[test]
    fn search_is_deterministic_across_thread_counts() {
        let base = SearchConfig { sizes: vec![2, 3], d: 2, trials: 24, max_degree: 3, seed: 9, grid: Some(64), threads: 0 };
        let a = serde_json::to_string(&random_search(&base).unwrap()).unwrap();
        let b = serde_json::to_string(&random_search(&SearchConfig { threads: 4, ..base.clone() }).unwrap()).unwrap();
        let c = serde_json::to_string(&random_search(&base).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn search_rejects_empty_budgets() {
        let bad = SearchConfig { sizes: vec![], d: 2, trials: 1, max_degree: 1, seed: 0, grid: None, threads: 0 };
        assert!(random_search(&bad).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn triangular_triples_are_certified(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let Some(t) = sample::triangular_family(&mut rng, 3, 2, 0.9) else { return Ok(()) };
            let p = sample::poly(&mut rng, 2, 3);
            let b = certified(&t, &p);
            prop_assert!(b.norm_of_ft <= 1.0 + 1e-8);
            prop_assert!(b.ratio <= 1.0 + 1e-6);
            prop_assert!(max_abs(&b.colligation.u().adjoint()) <= 1.0 + 1e-12);
        }
    }
}
