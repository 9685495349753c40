// Joint eigenvalues of commuting tuples, and what happens when the tuple is
// not diagonalizable.

use num_complex::Complex64;
use polypick::matrix::{joint_spectrum, perturb_to_diagonalizable, simultaneous_triangularize, CMatrix, MatrixTuple};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn run_example() -> polypick::Result<()> {
    // two polynomials in one matrix commute
    let m = CMatrix::from_row_slice(3, 3, &[c(0.2), c(0.1), c(0.0), c(0.0), c(-0.3), c(0.2), c(0.0), c(0.0), c(0.5)]);
    let t = MatrixTuple::new(vec![m.clone(), &m * &m * c(0.5)])?;
    let tri = simultaneous_triangularize(&t, 1)?;
    println!("triangularization residual {:.2e}", tri.residual);

    let spectrum = joint_spectrum(&t, 1)?;
    for (k, lambda) in spectrum.eigenvalues.iter().enumerate() {
        println!("λ_{k} = ({:.4}, {:.4})", lambda[0], lambda[1]);
    }
    assert!(spectrum.diagonalizable);

    // a nilpotent pair has a single joint eigenvalue of multiplicity three
    let mut shift = CMatrix::zeros(3, 3);
    shift[(0, 1)] = c(0.6);
    shift[(1, 2)] = c(0.6);
    let nil = MatrixTuple::new(vec![shift.clone(), &shift * c(0.5)])?;
    assert!(!joint_spectrum(&nil, 1)?.diagonalizable);
    let moved = perturb_to_diagonalizable(&nil, 1e-6, 1)?;
    println!("perturbed by {:.2e}; diagonalizable now: {}", nil.distance(&moved), joint_spectrum(&moved, 1)?.diagonalizable);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
