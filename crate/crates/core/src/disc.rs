//! Hyperbolic geometry of the open unit disc: Möbius automorphisms and the
//! pseudo-hyperbolic distance.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points with modulus at or above `1 - DISC_MARGIN` are rejected.
pub const DISC_MARGIN: f64 = 1e-9;

pub(crate) const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A complex number strictly inside the unit disc (with margin [`DISC_MARGIN`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Complex64", into = "Complex64")]
pub struct DiscPoint(Complex64);

impl DiscPoint {
    pub fn new(value: Complex64) -> Result<Self> {
        check_in_disc(value)?;
        Ok(Self(value))
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(Complex64::new(re, 0.0))
    }

    pub fn value(self) -> Complex64 {
        self.0
    }
}

impl TryFrom<Complex64> for DiscPoint {
    type Error = Error;

    fn try_from(value: Complex64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<DiscPoint> for Complex64 {
    fn from(p: DiscPoint) -> Self {
        p.0
    }
}

pub(crate) fn check_in_disc(z: Complex64) -> Result<()> {
    let modulus = z.norm();
    if !modulus.is_finite() || modulus >= 1.0 - DISC_MARGIN {
        return Err(Error::Domain { modulus, margin: DISC_MARGIN });
    }
    Ok(())
}

/// The disc automorphism `ζ ↦ rotation · (ζ − center) / (1 − conj(center) · ζ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscAutomorphism {
    rotation: Complex64,
    center: Complex64,
}

impl Default for DiscAutomorphism {
    fn default() -> Self {
        Self::identity()
    }
}

impl DiscAutomorphism {
    pub fn new(rotation: Complex64, center: DiscPoint) -> Result<Self> {
        if !rotation.is_finite() || (rotation.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("rotation {rotation} is not unimodular")));
        }
        Ok(Self { rotation: rotation / rotation.norm(), center: center.value() })
    }

    pub fn identity() -> Self {
        Self { rotation: ONE, center: ZERO }
    }

    /// `ζ ↦ (ζ − center)/(1 − conj(center)ζ)`, sending `center` to 0.
    pub fn centered_at(center: DiscPoint) -> Self {
        Self { rotation: ONE, center: center.value() }
    }

    /// The involution `ζ ↦ (center − ζ)/(1 − conj(center)ζ)` swapping 0 and `center`.
    pub fn involution(center: DiscPoint) -> Self {
        Self { rotation: -ONE, center: center.value() }
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn is_identity(&self) -> bool {
        self.center == ZERO && self.rotation == ONE
    }

    /// Evaluate on any point of the closed disc, without margin checks.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        if self.center == ZERO {
            return self.rotation * z;
        }
        self.rotation * (z - self.center) / (ONE - self.center.conj() * z)
    }

    pub fn inverse(&self) -> Self {
        Self { rotation: self.rotation.conj(), center: -self.rotation * self.center }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Self) -> Self {
        let [a, b, c, d] = self.coefficients();
        let [e, f, g, h] = inner.coefficients();
        let (p, q, s) = (a * e + b * g, a * f + b * h, c * f + d * h);
        // (p ζ + q) / (r ζ + s) normalized so the constant of the denominator is 1
        let rotation = p / s;
        let center = -q / p;
        Self { rotation: rotation / rotation.norm(), center }
    }

    // Möbius coefficients [a, b, c, d] of (aζ + b)/(cζ + d).
    fn coefficients(&self) -> [Complex64; 4] {
        [self.rotation, -self.rotation * self.center, -self.center.conj(), ONE]
    }

    /// The unique automorphism with `m(a1) = b1` and `m(a2) = b2`.
    ///
    /// Requires `ρ(a1, a2) = ρ(b1, b2)` up to rounding; the rotation is
    /// renormalized onto the unit circle.
    pub fn through_pairs(a1: Complex64, b1: Complex64, a2: Complex64, b2: Complex64) -> Result<Self> {
        for z in [a1, b1, a2, b2] {
            check_in_disc(z)?;
        }
        let from = Self { rotation: ONE, center: a1 };
        let to = Self { rotation: ONE, center: b1 };
        let x = from.eval(a2);
        let y = to.eval(b2);
        if x.norm() < 1e-14 {
            return Err(Error::Input("the two nodes coincide".into()));
        }
        let lambda = y / x;
        let rotate = Self { rotation: lambda / lambda.norm(), center: ZERO };
        Ok(to.inverse().compose(&rotate.compose(&from)))
    }

    /// Apply to a square matrix with spectrum in the disc:
    /// `rotation · (X − center·I)(I − conj(center)·X)⁻¹`.
    pub fn eval_matrix(&self, x: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        let n = x.nrows();
        let id = DMatrix::<Complex64>::identity(n, n);
        if self.center == ZERO {
            return Ok(x * self.rotation);
        }
        let num = x - &id * self.center;
        let den = &id - x * self.center.conj();
        let inv = den
            .try_inverse()
            .ok_or_else(|| Error::Precondition("matrix has an eigenvalue on the pole of the automorphism".into()))?;
        Ok(num * inv * self.rotation)
    }
}

/// `m(ζ)` for a disc point `ζ`.
pub fn mobius_apply(m: &DiscAutomorphism, z: DiscPoint) -> Result<DiscPoint> {
    DiscPoint::new(m.eval(z.value()))
}

pub fn mobius_inverse(m: &DiscAutomorphism) -> DiscAutomorphism {
    m.inverse()
}

/// Pseudo-hyperbolic distance `|(a − b)/(1 − conj(a) b)|`.
pub fn pseudo_hyperbolic(a: Complex64, b: Complex64) -> f64 {
    let den = (ONE - a.conj() * b).norm();
    if den == 0.0 {
        return 1.0;
    }
    ((a - b).norm() / den).min(1.0)
}
