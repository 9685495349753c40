// Bracketing `sup |p|` over the torus and the von Neumann ratio of a tuple.

use polypick::matrix::{MatrixTuple, MatrixTupleJson};
use polypick::poly::{default_grid, eval_tuple, torus_sup, vn_ratio, MultiPoly, PolyJson};

const POLY: &str = include_str!("data/poly_3var.json");
const TUPLE: &str = include_str!("data/nilpotent_tuple.json");

pub fn run_example() -> polypick::Result<()> {
    let p = MultiPoly::from_json(&serde_json::from_str::<PolyJson>(POLY)?)?;
    let sup = torus_sup(&p, default_grid(p.d()), 30)?;
    println!("sup |p| ∈ [{:.6}, {:.6}]", sup.lower, sup.upper);
    assert!(sup.lower <= sup.upper);

    let t = MatrixTuple::from_json(&serde_json::from_str::<MatrixTupleJson>(TUPLE)?)?;
    let pt = eval_tuple(&p, &t)?;
    println!("p(T) is {}×{}", pt.nrows(), pt.ncols());
    let ratio = vn_ratio(&p, &t, default_grid(p.d()))?;
    println!("‖p(T)‖ / sup|p| = {:.6}", ratio.ratio);
    assert!(!ratio.is_violation(1e-6));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
