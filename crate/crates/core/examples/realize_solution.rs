// From a certificate to a rational inner function.

use num_complex::Complex64;
use polypick::agler::{feasibility, FEAS_TOL, MAX_ITER};
use polypick::pick::PickProblem;
use polypick::realization::{build_colligation, inner_check, tf_eval_point};

pub fn run_example() -> polypick::Result<()> {
    let problem = PickProblem::new(
        [
            vec![Complex64::new(0.1, 0.2), Complex64::new(-0.3, 0.0)],
            vec![Complex64::new(0.5, -0.1), Complex64::new(0.2, 0.4)],
            vec![Complex64::new(-0.4, 0.3), Complex64::new(0.0, -0.5)],
        ],
        [Complex64::new(0.1, 0.0), Complex64::new(0.3, 0.2), Complex64::new(-0.2, 0.1)],
    )?;
    let Some(cert) = feasibility(&problem, FEAS_TOL, MAX_ITER).certificate().cloned() else {
        return Err(polypick::Error::Internal("expected a solvable problem".into()));
    };
    let col = build_colligation(&cert, &problem)?;
    println!("state space ℂ^{} split as {:?}, ‖U*U − I‖ = {:.1e}", col.r(), col.partition(), col.unitary_defect());

    for (z, t) in problem.nodes().iter().zip(problem.targets()) {
        println!("f(node) − target = {:.1e}", (tf_eval_point(&col, z)? - t).norm());
    }
    let inner = inner_check(&col, 2000, 1);
    println!("|f| near the torus ∈ [{:.6}, {:.6}]", inner.min_boundary_mod, inner.max_boundary_mod);

    let json = serde_json::to_string(&col.to_json())?;
    println!("colligation as JSON: {} bytes", json.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
