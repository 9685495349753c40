// A certified von Neumann bound for a non-diagonalizable 3×3 tuple.

use polypick::matrix::{MatrixTuple, MatrixTupleJson};
use polypick::poly::{MultiPoly, PolyJson};
use polypick::vn::{certify_vn, CertifyConfig, VnOutcome};

const TUPLE: &str = include_str!("data/nilpotent_tuple.json");
const POLY: &str = include_str!("data/poly_3var.json");

pub fn run_example() -> polypick::Result<()> {
    let t = MatrixTuple::from_json(&serde_json::from_str::<MatrixTupleJson>(TUPLE)?)?;
    let p = MultiPoly::from_json(&serde_json::from_str::<PolyJson>(POLY)?)?;
    match certify_vn(&t, &p, &CertifyConfig::default())? {
        VnOutcome::Certified(bound) => {
            println!("‖p(T)‖ / sup|p| = {:.6}", bound.ratio);
            println!("‖f(T)‖ = {:.6}, reconstruction residual {:.1e}", bound.norm_of_ft, bound.reconstruction_residual);
            println!("perturbed by {:.1e} first", bound.diagnostics.perturbation_distance);
        }
        VnOutcome::TheoremViolationCandidate(v) => println!("violation candidate, Farkas gap {:.2e}", v.gap),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
