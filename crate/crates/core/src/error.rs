use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by the layer that produces them; the CLI maps them
/// onto exit codes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {modulus} is outside the disc margin (|z| must be < 1 - {margin})")]
    Domain { modulus: f64, margin: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("no random combination triangularized the tuple (best residual {residual:e} after {tries} draws)")]
    DegenerateCombination { residual: f64, tries: usize },

    #[error("perturbation to a diagonalizable tuple failed: distance {distance:e}, commutator residual {commutator:e}")]
    PerturbationFailure { distance: f64, commutator: f64 },

    #[error("torus grid of {points} points exceeds the budget of {cap}; use a smaller grid")]
    Budget { points: f64, cap: f64 },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("could not separate node moduli and distances by {gap_min:e} within {tries} tries")]
    Genericity { gap_min: f64, tries: usize },

    #[error("tied maxima within {tol:e} on pair {pair:?}; perturb the nodes first (--perturb)")]
    Ambiguity { pair: [usize; 2], tol: f64 },

    #[error("no solution: the unique candidate misses node {node} by {miss:e}")]
    NoSolution { node: usize, miss: f64 },

    #[error("hypotheses not met: {0}")]
    Hypothesis(String),

    #[error("feasibility indeterminate inside the bracket [{lo}, {hi}]")]
    IndeterminateExtremality { lo: f64, hi: f64 },

    #[error("monotonicity of feasibility in the target scale violated: feasible at {feasible}, infeasible at {infeasible}")]
    Monotonicity { feasible: f64, infeasible: f64 },

    #[error("inconsistent certificate: Gram identity off by {residual:e}")]
    InconsistentCertificate { residual: f64 },

    #[error("rank ambiguity in block {block}: candidate ranks {low} and {high}")]
    RankAmbiguity { block: usize, low: usize, high: usize },

    #[error("resolvent singular at the boundary point")]
    BoundarySingularity,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("pipeline failed at stage `{stage}`: {source}")]
    Pipeline {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Pipeline { stage, source: Box::new(source) }
    }

    /// Exit code for the command-line front end: 1 for a mathematical "no",
    /// 2 for numerically indeterminate outcomes, 3 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoSolution { .. } => 1,
            Error::Ambiguity { .. }
            | Error::Genericity { .. }
            | Error::DegenerateCombination { .. }
            | Error::PerturbationFailure { .. }
            | Error::IndeterminateExtremality { .. }
            | Error::Monotonicity { .. }
            | Error::InconsistentCertificate { .. }
            | Error::RankAmbiguity { .. }
            | Error::BoundarySingularity
            | Error::Internal(_)
            | Error::Pipeline { .. } => 2,
            Error::Domain { .. }
            | Error::Input(_)
            | Error::Budget { .. }
            | Error::UndefinedRatio(_)
            | Error::Hypothesis(_)
            | Error::Precondition(_)
            | Error::Io(_)
            | Error::Json(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
