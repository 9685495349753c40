// Disc automorphisms: the maps that move a Pick problem into normal form.

use num_complex::Complex64;
use polypick::disc::{pseudo_hyperbolic, DiscAutomorphism, DiscPoint};

pub fn run_example() -> polypick::Result<()> {
    let a = Complex64::new(0.3, -0.4);
    let b = Complex64::new(-0.5, 0.1);

    // φ_a sends a to the origin and preserves ρ
    let phi = DiscAutomorphism::centered_at(DiscPoint::new(a)?);
    println!("φ(a) = {:.3e}", phi.eval(a).norm());
    let before = pseudo_hyperbolic(a, b);
    let after = pseudo_hyperbolic(phi.eval(a), phi.eval(b));
    println!("ρ(a, b) = {before:.12}, after the map {after:.12}");
    assert!((before - after).abs() < 1e-12);

    let back = phi.inverse().eval(phi.eval(b));
    assert!((back - b).norm() < 1e-12);

    // the automorphism through two prescribed pairs exists iff they are ρ-isometric
    let rot = Complex64::from_polar(1.0, 0.7);
    let m = DiscAutomorphism::through_pairs(a, rot * a, b, rot * b)?;
    println!("rotation recovered: {:.6}", m.rotation());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
