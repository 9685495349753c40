//! Command-line front end. [`run`] is the whole program minus process I/O, so
//! it can be driven from tests.
//!
//! Exit codes: 0 success, 1 infeasible or violation, 2 numerically
//! indeterminate, 3 input error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::agler::{feasibility, FeasibilityStatus, FEAS_TOL, MAX_ITER};
use crate::error::{Error, Result};
use crate::matrix::{MatrixTuple, MatrixTupleJson};
use crate::pick::{classify_with, normalize, perturb_generic, ClassifyOptions, PickProblem, PickProblemJson, COND_TOL};
use crate::poly::{default_grid, vn_ratio, MultiPoly, PolyJson};
use crate::realization::{build_colligation, tf_eval_point};
use crate::vn::{certify_vn, random_search, threads_from_env, CertifyConfig, SearchConfig, VnOutcome};

#[derive(Debug, Parser)]
#[command(name = "polypick", version, about = "Three-point Pick problems on the polydisc and von Neumann checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pick interpolation problems.
    #[command(subcommand)]
    Pick(PickCommand),
    /// Von Neumann inequality for commuting matrix tuples.
    #[command(subcommand)]
    Vn(VnCommand),
}

#[derive(Debug, Subcommand)]
enum PickCommand {
    /// Classify a problem as degenerate, non-degenerate or with an infeasible pair.
    Classify {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decide solvability; on success emit the certificate and a realization.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
enum VnCommand {
    /// Certified bound for a commuting 3×3 tuple.
    Certify {
        tuple: PathBuf,
        poly: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// `‖p(T)‖ / sup |p|` for a tuple of any size.
    Ratio {
        tuple: PathBuf,
        poly: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Randomized search over commuting tuples.
    Search {
        /// Matrix sizes, cycled through the trials.
        #[arg(long, value_delimiter = ',', default_value = "3")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        degree: u32,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Tolerance override (feasibility, or ratio slack for vn commands).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Torus grid points per coordinate.
    #[arg(long)]
    grid: Option<usize>,
    /// Perturb nodes to general position by at most δ before working.
    #[arg(long, value_name = "δ")]
    perturb: Option<f64>,
    #[arg(long)]
    pretty: bool,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Result of one invocation.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, S>(args: I) -> CliOutput
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) { 0 } else { 3 };
            let text = e.render().to_string();
            return if code == 0 {
                CliOutput { code, stdout: text, stderr: String::new() }
            } else {
                CliOutput { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(out) => out,
        Err(e) => CliOutput { code: e.exit_code(), stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn emit(value: &impl Serialize, code: i32, common: &Common) -> Result<CliOutput> {
    let mut text =
        if common.pretty { serde_json::to_string_pretty(value)? } else { serde_json::to_string(value)? };
    text.push('\n');
    match &common.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            Ok(CliOutput { code, stdout: String::new(), stderr: String::new() })
        }
        None => Ok(CliOutput { code, stdout: text, stderr: String::new() }),
    }
}

/// The problem as given, or its normalized form moved to general position.
fn prepared(path: &Path, common: &Common) -> Result<PickProblem> {
    let problem = PickProblem::from_json(&read_json::<PickProblemJson>(path)?)?;
    match common.perturb {
        Some(delta) => perturb_generic(&normalize(&problem).0, delta, common.seed),
        None => Ok(problem),
    }
}

fn dispatch(command: Command) -> Result<CliOutput> {
    match command {
        Command::Pick(PickCommand::Classify { problem, common }) => {
            let problem = prepared(&problem, &common)?;
            let options = ClassifyOptions { cond_tol: common.tol.unwrap_or(COND_TOL), ..ClassifyOptions::default() };
            let report = classify_with(&problem, &options)?;
            emit(&report, 0, &common)
        }
        Command::Pick(PickCommand::Solve { problem, common }) => {
            let problem = prepared(&problem, &common)?;
            let outcome =
                feasibility(&problem, common.tol.unwrap_or(FEAS_TOL), common.max_iter.unwrap_or(MAX_ITER));
            match outcome.status {
                FeasibilityStatus::Feasible(cert) => {
                    let col = build_colligation(&cert, &problem)?;
                    let residuals = (0..3)
                        .map(|j| Ok((tf_eval_point(&col, &problem.nodes()[j])? - problem.targets()[j]).norm()))
                        .collect::<Result<Vec<f64>>>()?;
                    let report = serde_json::json!({
                        "status": "FEASIBLE",
                        "iterations": outcome.iterations,
                        "problem": problem.to_json(),
                        "certificate": cert.to_json(),
                        "colligation": col.to_json(),
                        "interpolation_residuals": residuals,
                    });
                    emit(&report, 0, &common)
                }
                FeasibilityStatus::Infeasible { gap } => {
                    emit(&serde_json::json!({ "status": "INFEASIBLE", "gap": gap }), 1, &common)
                }
                FeasibilityStatus::Indeterminate { distance } => emit(
                    &serde_json::json!({ "status": "INDETERMINATE", "distance": distance, "iterations": outcome.iterations }),
                    2,
                    &common,
                ),
            }
        }
        Command::Vn(VnCommand::Certify { tuple, poly, common }) => {
            let (t, p) = load_pair(&tuple, &poly)?;
            let mut config = CertifyConfig { seed: common.seed, grid: common.grid, ..CertifyConfig::default() };
            if let Some(tol) = common.tol {
                config.feas_tol = tol;
            }
            if let Some(max_iter) = common.max_iter {
                config.max_iter = max_iter;
            }
            if let Some(eps) = common.perturb {
                config.epsilon = eps;
            }
            let outcome = certify_vn(&t, &p, &config)?;
            let code = match outcome {
                VnOutcome::Certified(_) => 0,
                VnOutcome::TheoremViolationCandidate(_) => 1,
            };
            emit(&outcome.to_json(), code, &common)
        }
        Command::Vn(VnCommand::Ratio { tuple, poly, common }) => {
            let (t, p) = load_pair(&tuple, &poly)?;
            let ratio = vn_ratio(&p, &t, common.grid.unwrap_or_else(|| default_grid(p.d())))?;
            let code = i32::from(ratio.is_violation(common.tol.unwrap_or(1e-6)));
            emit(&ratio, code, &common)
        }
        Command::Vn(VnCommand::Search { sizes, dim, trials, degree, common }) => {
            let config = SearchConfig {
                sizes,
                d: dim,
                trials,
                max_degree: degree,
                seed: common.seed,
                grid: common.grid,
                threads: threads_from_env(),
            };
            let report = random_search(&config)?;
            let code = i32::from(!report.holds(common.tol.unwrap_or(1e-6)));
            emit(&report, code, &common)
        }
    }
}

fn load_pair(tuple: &Path, poly: &Path) -> Result<(MatrixTuple, MultiPoly)> {
    let t = MatrixTuple::from_json(&read_json::<MatrixTupleJson>(tuple)?)?;
    let p = MultiPoly::from_json(&read_json::<PolyJson>(poly)?)?;
    if t.d() != p.d() {
        return Err(Error::Input(format!("tuple has {} matrices but the polynomial has {} variables", t.d(), p.d())));
    }
    Ok((t, p))
}
