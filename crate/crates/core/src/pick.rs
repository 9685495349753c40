//! Three-point Pick problems on the polydisc.
//!
//! A problem asks for a holomorphic `f: 𝔻ᵈ → 𝔻` with `f(node_k) = target_k`
//! for `k = 0, 1, 2`. This module normalizes problems by disc automorphisms,
//! separates node data into generic position, classifies two-point
//! extremality, and solves the degenerate case, where the solution is
//! forced to be a disc automorphism of a single coordinate.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agler;
use crate::disc::{check_in_disc, pseudo_hyperbolic, DiscAutomorphism, DiscPoint, ZERO};
use crate::error::{Error, Result};

/// Width of the band in which a two-point subproblem counts as extremal.
pub const COND_TOL: f64 = 1e-9;
/// Minimum separation of node moduli and distances after [`perturb_generic`].
pub const GAP_MIN: f64 = 1e-7;
pub const GENERIC_MAX_TRIES: usize = 32;
/// Node moves used when a classification falls inside the ambiguity band.
pub const DEFAULT_PERTURBATION: f64 = 1e-6;
/// Allowed miss of the third condition in [`solve_degenerate`].
pub const SOL_TOL: f64 = 1e-8;

/// The pairs of node indices, in the order they are examined.
pub const PAIRS: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];

#[derive(Clone, Debug, PartialEq)]
pub struct PickProblem {
    d: usize,
    nodes: [Vec<Complex64>; 3],
    targets: [Complex64; 3],
}

impl PickProblem {
    pub fn new(nodes: [Vec<Complex64>; 3], targets: [Complex64; 3]) -> Result<Self> {
        let d = nodes[0].len();
        if d == 0 {
            return Err(Error::Input("nodes need at least one coordinate".into()));
        }
        for (k, node) in nodes.iter().enumerate() {
            if node.len() != d {
                return Err(Error::Input(format!("node {k} has {} coordinates, expected {d}", node.len())));
            }
            node.iter().try_for_each(|z| check_in_disc(*z))?;
        }
        targets.iter().try_for_each(|t| check_in_disc(*t))?;
        for [a, b] in PAIRS {
            if nodes[a] == nodes[b] {
                return Err(Error::Input(format!("nodes {a} and {b} coincide")));
            }
        }
        Ok(Self { d, nodes, targets })
    }

    /// Convenience constructor from real coordinates.
    pub fn real(nodes: [&[f64]; 3], targets: [f64; 3]) -> Result<Self> {
        let c = |x: &f64| Complex64::new(*x, 0.0);
        Self::new(nodes.map(|n| n.iter().map(c).collect()), targets.map(|t| c(&t)))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nodes(&self) -> &[Vec<Complex64>; 3] {
        &self.nodes
    }

    pub fn targets(&self) -> &[Complex64; 3] {
        &self.targets
    }

    /// The same nodes with every target multiplied by `r`.
    pub fn scaled_targets(&self, r: f64) -> Result<Self> {
        Self::new(self.nodes.clone(), self.targets.map(|t| t * r))
    }

    pub fn with_targets(&self, targets: [Complex64; 3]) -> Result<Self> {
        Self::new(self.nodes.clone(), targets)
    }

    pub fn is_normalized(&self) -> bool {
        self.nodes[0].iter().all(|z| *z == ZERO) && self.targets[0] == ZERO
    }

    pub fn to_json(&self) -> PickProblemJson {
        PickProblemJson { d: self.d, nodes: self.nodes.to_vec(), targets: self.targets.to_vec() }
    }

    pub fn from_json(json: &PickProblemJson) -> Result<Self> {
        let nodes: [Vec<Complex64>; 3] = json
            .nodes
            .clone()
            .try_into()
            .map_err(|_| Error::Input(format!("expected 3 nodes, found {}", json.nodes.len())))?;
        let targets: [Complex64; 3] = json
            .targets
            .clone()
            .try_into()
            .map_err(|_| Error::Input(format!("expected 3 targets, found {}", json.targets.len())))?;
        let problem = Self::new(nodes, targets)?;
        if problem.d != json.d {
            return Err(Error::Input(format!("declared d = {} but nodes have {} coordinates", json.d, problem.d)));
        }
        Ok(problem)
    }
}

/// `{"d": int, "nodes": [[[re,im],...] ×3], "targets": [[re,im] ×3]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PickProblemJson {
    pub d: usize,
    pub nodes: Vec<Vec<Complex64>>,
    pub targets: Vec<Complex64>,
}

/// Automorphisms taking a problem to its normalized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// One automorphism per coordinate, applied to the nodes.
    pub node_maps: Vec<DiscAutomorphism>,
    /// Applied to the targets.
    pub target_map: DiscAutomorphism,
}

impl Normalization {
    pub fn is_identity(&self) -> bool {
        self.target_map.is_identity() && self.node_maps.iter().all(DiscAutomorphism::is_identity)
    }

    pub fn map_point(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.node_maps.iter().zip(z).map(|(m, x)| m.eval(*x)).collect()
    }

    /// Turns a solution `g` of the normalized problem into a solution of the
    /// original one: `f = target_map⁻¹ ∘ g ∘ node_maps`.
    pub fn pull_back<'a, G>(&'a self, g: G) -> impl Fn(&[Complex64]) -> Result<Complex64> + 'a
    where
        G: Fn(&[Complex64]) -> Result<Complex64> + 'a,
    {
        let back = self.target_map.inverse();
        move |z| Ok(back.eval(g(&self.map_point(z))?))
    }
}

/// Moves the first node to the origin and the first target to 0.
pub fn normalize(problem: &PickProblem) -> (PickProblem, Normalization) {
    if problem.is_normalized() {
        let identity = Normalization {
            node_maps: vec![DiscAutomorphism::identity(); problem.d],
            target_map: DiscAutomorphism::identity(),
        };
        return (problem.clone(), identity);
    }
    let centered = |z: Complex64| DiscAutomorphism::centered_at(DiscPoint::new(z).expect("validated"));
    let node_maps: Vec<DiscAutomorphism> = problem.nodes[0].iter().map(|z| centered(*z)).collect();
    let target_map = centered(problem.targets[0]);
    let norm = Normalization { node_maps, target_map };
    let mut nodes = problem.nodes.clone().map(|n| norm.map_point(&n));
    nodes[0] = vec![ZERO; problem.d];
    let mut targets = problem.targets.map(|t| target_map.eval(t));
    targets[0] = ZERO;
    // Images of interior points stay interior; the margin can only be lost through rounding.
    let normalized = PickProblem { d: problem.d, nodes, targets };
    (normalized, norm)
}

/// The `3d` quantities `|z_j|`, `|w_j|`, `ρ(z_j, w_j)` of a normalized problem.
fn genericity_quantities(problem: &PickProblem) -> Vec<f64> {
    let [_, z, w] = &problem.nodes;
    let mut out: Vec<f64> = z.iter().map(|x| x.norm()).collect();
    out.extend(w.iter().map(|x| x.norm()));
    out.extend(z.iter().zip(w).map(|(a, b)| pseudo_hyperbolic(*a, *b)));
    out
}

fn min_separation(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Moves the two non-zero nodes of a normalized problem by at most `delta`
/// per coordinate until all of `|z_j|, |w_j|, ρ(z_j, w_j)` are separated by
/// at least [`GAP_MIN`]. Targets are never touched.
pub fn perturb_generic(problem: &PickProblem, delta: f64, seed: u64) -> Result<PickProblem> {
    if !problem.nodes[0].iter().all(|z| *z == ZERO) {
        return Err(Error::Precondition("perturb_generic expects the first node at the origin".into()));
    }
    if min_separation(&genericity_quantities(problem)) >= GAP_MIN {
        return Ok(problem.clone());
    }
    let fail = Error::Genericity { gap_min: GAP_MIN, tries: GENERIC_MAX_TRIES };
    if !(delta > 0.0) {
        return Err(fail);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERIC_MAX_TRIES {
        let mut nodes = problem.nodes.clone();
        for node in nodes.iter_mut().skip(1) {
            for z in node.iter_mut() {
                let r = delta * rng.random::<f64>().sqrt();
                let step = Complex64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU);
                *z += step;
            }
        }
        let Ok(candidate) = PickProblem::new(nodes, problem.targets) else {
            continue;
        };
        let moved_ok = candidate.nodes.iter().zip(&problem.nodes).all(|(a, b)| a.iter().zip(b).all(|(x, y)| (x - y).norm() <= delta));
        if moved_ok && min_separation(&genericity_quantities(&candidate)) >= GAP_MIN {
            return Ok(candidate);
        }
    }
    Err(fail)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProblemKind {
    Degenerate,
    NonDegenerate,
    /// Some two-point subproblem already asks too much; no solution exists.
    InfeasibleSubproblem,
}

/// Which two-point subproblem is extremal, and in which coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE", tag = "type")]
pub enum DegenerateCondition {
    /// A pair containing the first node: `|t| = max_j |node_j|` after normalization.
    TargetVsNode { pair: [usize; 2], coordinate: usize },
    /// The pair of the other two nodes: `ρ(σ, τ) = max_j ρ(z_j, w_j)`.
    RhoPair { pair: [usize; 2], coordinate: usize },
}

impl DegenerateCondition {
    pub fn pair(&self) -> [usize; 2] {
        match *self {
            Self::TargetVsNode { pair, .. } | Self::RhoPair { pair, .. } => pair,
        }
    }

    pub fn coordinate(&self) -> usize {
        match *self {
            Self::TargetVsNode { coordinate, .. } | Self::RhoPair { coordinate, .. } => coordinate,
        }
    }
}

/// Compared quantities for one pair of nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub pair: [usize; 2],
    /// `ρ(t_a, t_b)`.
    pub target_side: f64,
    /// `max_j ρ(node_a_j, node_b_j)`.
    pub node_side: f64,
    /// Coordinate attaining `node_side`.
    pub coordinate: usize,
    /// Second largest coordinate distance (0 for `d = 1`).
    pub runner_up: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub kind: ProblemKind,
    pub degenerate_condition: Option<DegenerateCondition>,
    pub infeasible_pair: Option<[usize; 2]>,
    /// Whether the whole problem is extremal; always true for degenerate problems.
    pub extremal: Option<bool>,
    /// Largest target scale keeping the problem solvable, when computed.
    pub r_star: Option<f64>,
    pub witnesses: Vec<PairWitness>,
    /// Why `extremal` is missing for a non-degenerate problem, if it is.
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    pub cond_tol: f64,
    /// Run the extremality bisection on non-degenerate problems, to this bracket width.
    pub extremality_tol: Option<f64>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { cond_tol: COND_TOL, extremality_tol: Some(1e-6) }
    }
}

impl ClassifyOptions {
    pub fn without_extremality() -> Self {
        Self { extremality_tol: None, ..Self::default() }
    }
}

fn pair_witness(problem: &PickProblem, [a, b]: [usize; 2]) -> PairWitness {
    let distances: Vec<f64> =
        problem.nodes[a].iter().zip(&problem.nodes[b]).map(|(x, y)| pseudo_hyperbolic(*x, *y)).collect();
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|i, j| distances[*j].total_cmp(&distances[*i]));
    PairWitness {
        pair: [a, b],
        target_side: pseudo_hyperbolic(problem.targets[a], problem.targets[b]),
        node_side: distances[order[0]],
        coordinate: order[0],
        runner_up: order.get(1).map_or(0.0, |k| distances[*k]),
    }
}

/// Classifies a problem by its two-point subproblems.
///
/// Every pair is compared through the pseudo-hyperbolic distance, so the
/// result does not depend on normalization (`ρ(0, a) = |a|`). A pair is
/// extremal when `ρ(t_a, t_b)` is within `cond_tol` of `max_j ρ(a_j, b_j)`,
/// and infeasible when it exceeds it by more.
pub fn classify(problem: &PickProblem) -> Result<ClassificationReport> {
    classify_with(problem, &ClassifyOptions::default())
}

pub fn classify_with(problem: &PickProblem, options: &ClassifyOptions) -> Result<ClassificationReport> {
    let tol = options.cond_tol;
    let witnesses: Vec<PairWitness> = PAIRS.iter().map(|p| pair_witness(problem, *p)).collect();
    let mut report = ClassificationReport {
        kind: ProblemKind::NonDegenerate,
        degenerate_condition: None,
        infeasible_pair: None,
        extremal: None,
        r_star: None,
        witnesses: witnesses.clone(),
        note: None,
    };
    report.infeasible_pair = witnesses.iter().find(|w| w.target_side > w.node_side + tol).map(|w| w.pair);
    if let Some(w) = witnesses.iter().find(|w| (w.target_side - w.node_side).abs() <= tol) {
        if problem.d > 1 && w.runner_up >= w.node_side - tol {
            return Err(Error::Ambiguity { pair: w.pair, tol });
        }
        let condition = if w.pair[0] == 0 {
            DegenerateCondition::TargetVsNode { pair: w.pair, coordinate: w.coordinate }
        } else {
            DegenerateCondition::RhoPair { pair: w.pair, coordinate: w.coordinate }
        };
        report.kind = ProblemKind::Degenerate;
        report.degenerate_condition = Some(condition);
        report.extremal = Some(true);
        return Ok(report);
    }
    if report.infeasible_pair.is_some() {
        report.kind = ProblemKind::InfeasibleSubproblem;
        return Ok(report);
    }
    if let Some(ext_tol) = options.extremality_tol {
        match agler::extremality(problem, ext_tol) {
            Ok(ext) => {
                report.extremal = Some(ext.extremal);
                report.r_star = Some(ext.r_star);
            }
            Err(e) => report.note = Some(e.to_string()),
        }
    }
    Ok(report)
}

/// `f(z) = post_map(z_coordinate)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneVariableSolution {
    pub coordinate: usize,
    pub post_map: DiscAutomorphism,
}

impl OneVariableSolution {
    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.post_map.eval(z[self.coordinate])
    }
}

/// The unique solution of a degenerate problem.
///
/// The extremal pair pins down a disc automorphism `m` of the active
/// coordinate; the candidate `m(z_j)` is then checked against the remaining
/// node. Because the solution is unique, a miss larger than [`SOL_TOL`] proves
/// that the problem has no solution.
pub fn solve_degenerate(problem: &PickProblem, report: &ClassificationReport) -> Result<OneVariableSolution> {
    let condition = match (report.kind, report.degenerate_condition) {
        (ProblemKind::Degenerate, Some(c)) => c,
        _ => return Err(Error::Precondition("problem is not classified as degenerate".into())),
    };
    let [a, b] = condition.pair();
    let j = condition.coordinate();
    let post_map = DiscAutomorphism::through_pairs(
        problem.nodes[a][j],
        problem.targets[a],
        problem.nodes[b][j],
        problem.targets[b],
    )?;
    let solution = OneVariableSolution { coordinate: j, post_map };
    let third = 3 - a - b;
    let miss = (solution.eval(&problem.nodes[third]) - problem.targets[third]).norm();
    if miss > SOL_TOL {
        return Err(Error::NoSolution { node: third, miss });
    }
    Ok(solution)
}

/// Central-difference gradient `(∂f/∂z_k(0))_k` with real step `h`.
pub fn gradient_at_zero<F>(f: F, d: usize, h: f64) -> Result<Vec<Complex64>>
where
    F: Fn(&[Complex64]) -> Result<Complex64>,
{
    (0..d)
        .map(|k| {
            let mut plus = vec![ZERO; d];
            let mut minus = vec![ZERO; d];
            plus[k] = Complex64::new(h, 0.0);
            minus[k] = Complex64::new(-h, 0.0);
            Ok((f(&plus)? - f(&minus)?) / (2.0 * h))
        })
        .collect()
}

/// Outcome of [`lemma_uniqueness_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessAudit {
    pub agrees: bool,
    /// Largest `|f(z) − z_j|` over the sample.
    pub max_deviation: f64,
    /// `Σ_k |∂f/∂z_k(0)|`.
    pub gradient_sum: f64,
}

/// Audits the uniqueness lemma on a black-box `f`: when `f(0) = 0`,
/// `f(w) = w_j` and `|w_j|` strictly dominates the other coordinates of `w`,
/// `f` must be the coordinate function `z ↦ z_j`.
///
/// Checks agreement with `z_j` on 1000 seeded random points of the polydisc
/// (within 1e-6) and the gradient bound `Σ|∂f/∂z_k(0)| ≤ 1 + 1e-5`.
pub fn lemma_uniqueness_check<F>(f: F, w: &[Complex64], j: usize) -> Result<UniquenessAudit>
where
    F: Fn(&[Complex64]) -> Result<Complex64>,
{
    let d = w.len();
    if j >= d {
        return Err(Error::Input(format!("coordinate {j} out of range for d = {d}")));
    }
    let at_zero = f(&vec![ZERO; d])?;
    if at_zero.norm() > 1e-7 {
        return Err(Error::Hypothesis(format!("f(0) = {at_zero} is not 0")));
    }
    let at_w = f(w)?;
    if (at_w - w[j]).norm() > 1e-7 {
        return Err(Error::Hypothesis(format!("f(w) = {at_w} differs from w_{j} = {}", w[j])));
    }
    if (0..d).any(|k| k != j && w[k].norm() >= w[j].norm()) {
        return Err(Error::Hypothesis(format!("|w_{j}| is not the strict maximum of the coordinates")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut max_deviation = 0.0f64;
    for _ in 0..1000 {
        let z: Vec<Complex64> = (0..d)
            .map(|_| Complex64::from_polar(0.99 * rng.random::<f64>().sqrt(), rng.random::<f64>() * std::f64::consts::TAU))
            .collect();
        max_deviation = max_deviation.max((f(&z)? - z[j]).norm());
    }
    let gradient_sum = gradient_at_zero(&f, d, 1e-5)?.iter().map(|g| g.norm()).sum::<f64>();
    Ok(UniquenessAudit { agrees: max_deviation <= 1e-6 && gradient_sum <= 1.0 + 1e-5, max_deviation, gradient_sum })
}
