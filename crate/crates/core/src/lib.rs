//! Three-point Pick interpolation on the polydisc.
//!
//! * [`disc`] — Möbius automorphisms and the pseudo-hyperbolic metric.
//! * [`matrix`] — commuting matrix tuples, joint spectra, perturbation to
//!   diagonalizable tuples.
//! * [`poly`] — polynomials in `d` variables, evaluation at tuples, torus suprema.
//! * [`pick`] — problems, normalization, degenerate/non-degenerate classification.
//! * [`agler`] — Agler certificates: feasibility, infeasibility bounds, extremality.
//! * [`realization`] — unitary colligations realizing a certificate.
//! * [`vn`] — certified von Neumann bounds for 3×3 tuples and a random search.
//! * [`sample`] — seeded generators used by the tests and examples.
//! * [`cli`] — the `polypick` command line.

pub mod agler;
pub mod cli;
pub mod disc;
pub mod error;
pub mod matrix;
pub mod pick;
pub mod poly;
pub mod realization;
pub mod sample;
pub mod vn;

pub use error::{Error, Result};
