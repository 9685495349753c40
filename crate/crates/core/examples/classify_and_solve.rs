// Classifying three-point problems, and the explicit solution of a
// degenerate one.

use num_complex::Complex64;
use polypick::pick::{classify, lemma_uniqueness_check, solve_degenerate, PickProblem, ProblemKind};

pub fn run_example() -> polypick::Result<()> {
    // t = z₁ interpolates, and the pair (0, node 1) is extremal in coordinate 0
    let degenerate = PickProblem::real([&[0.0, 0.0], &[0.5, 0.3], &[0.3, 0.2]], [0.0, 0.5, 0.3])?;
    let report = classify(&degenerate)?;
    println!("{:?} via {:?}", report.kind, report.degenerate_condition);
    assert_eq!(report.kind, ProblemKind::Degenerate);

    let solution = solve_degenerate(&degenerate, &report)?;
    let w = [Complex64::new(0.5, 0.0), Complex64::new(0.3, 0.0)];
    let audit = lemma_uniqueness_check(|z| Ok(solution.eval(z)), &w, solution.coordinate)?;
    println!("f depends on z_{} only; deviation {:.1e}", solution.coordinate, audit.max_deviation);

    // halving the targets leaves room to spare
    let slack = PickProblem::real([&[0.0, 0.0], &[0.5, 0.3], &[0.3, 0.2]], [0.0, 0.25, 0.15])?;
    let report = classify(&slack)?;
    println!("{:?}, extremal: {:?}, r* ≈ {:?}", report.kind, report.extremal, report.r_star);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
