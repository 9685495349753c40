// Deciding solvability with an Agler certificate.

use polypick::agler::{extremality, feasibility, pick_oracle_1d, FeasibilityStatus, FEAS_TOL, MAX_ITER};
use polypick::pick::PickProblem;

pub fn run_example() -> polypick::Result<()> {
    let one_var = PickProblem::real([&[0.0], &[0.5], &[-0.4]], [0.0, 0.3, -0.2])?;
    let out = feasibility(&one_var, FEAS_TOL, MAX_ITER);
    println!("one variable: {} (Pick matrix says {})", out.label(), pick_oracle_1d(&one_var)?);

    let problem = PickProblem::real([&[0.0, 0.0], &[0.5, 0.3], &[0.3, 0.2]], [0.0, 0.25, 0.15])?;
    match feasibility(&problem, FEAS_TOL, MAX_ITER).status {
        FeasibilityStatus::Feasible(cert) => {
            println!("certificate residual {:.1e}, min eigenvalue {:.1e}", cert.feas_residual, cert.min_eig)
        }
        other => println!("unexpected: {other:?}"),
    }

    // too large a target breaks the Schwarz lemma
    let violation = PickProblem::real([&[0.0, 0.0], &[0.5, 0.3], &[0.3, 0.2]], [0.0, 0.6, 0.3])?;
    println!("Schwarz violation: {}", feasibility(&violation, FEAS_TOL, MAX_ITER).label());

    let ex = extremality(&problem, 1e-6)?;
    println!("targets scale up to r* ∈ [{:.7}, {:.7}] ({} probes)", ex.lo, ex.hi, ex.probes.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
