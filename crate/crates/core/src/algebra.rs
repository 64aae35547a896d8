//! Complex 2×2 matrices, the quaternionic parametrization of block Green's
//! functions, and the U-rotations used by the non-hermitian product law.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Determinants with modulus at or below this value are treated as singular.
pub const SINGULAR_DET: f64 = 1e-300;

/// A dense complex 2×2 matrix stored row-major.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Complex2x2 {
    pub q11: Complex64,
    pub q12: Complex64,
    pub q21: Complex64,
    pub q22: Complex64,
}

impl Complex2x2 {
    pub const fn new(q11: Complex64, q12: Complex64, q21: Complex64, q22: Complex64) -> Self {
        Self { q11, q12, q21, q22 }
    }

    pub const fn zero() -> Self {
        let z = Complex64 { re: 0.0, im: 0.0 };
        Self::new(z, z, z, z)
    }

    pub const fn identity() -> Self {
        let z = Complex64 { re: 0.0, im: 0.0 };
        let one = Complex64 { re: 1.0, im: 0.0 };
        Self::new(one, z, z, one)
    }

    pub fn diag(d1: Complex64, d2: Complex64) -> Self {
        Self::new(d1, Complex64::default(), Complex64::default(), d2)
    }

    /// `Z = diag(z, z̄)`, the spectral-plane argument of the block resolvent.
    pub fn spectral(z: Complex64) -> Self {
        Self::diag(z, z.conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.q11 * s, self.q12 * s, self.q21 * s, self.q22 * s)
    }

    pub fn det(&self) -> Complex64 {
        self.q11 * self.q22 - self.q12 * self.q21
    }

    pub fn trace(&self) -> Complex64 {
        self.q11 + self.q22
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.q11, self.q12, self.q21, self.q22]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// Adjugate over determinant.
    pub fn invert(&self) -> Result<Self> {
        let det = self.det();
        if !(det.norm() > SINGULAR_DET) {
            return Err(Error::Singular { det: det.norm() });
        }
        let inv = det.inv();
        Ok(Self::new(self.q22 * inv, -self.q12 * inv, -self.q21 * inv, self.q11 * inv))
    }

    /// `U X U†` with `U = diag(e^{iψ/2}, e^{-iψ/2})`.
    pub fn rotate_left(&self, psi: f64) -> Self {
        URotation::new(psi).left(self)
    }

    /// `U† X U` with `U = diag(e^{iψ/2}, e^{-iψ/2})`.
    pub fn rotate_right(&self, psi: f64) -> Self {
        URotation::new(psi).right(self)
    }

    /// Commutator `XY - YX`.
    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }
}

impl fmt::Debug for Complex2x2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.q11, self.q12, self.q21, self.q22
        )
    }
}

impl Add for Complex2x2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.q11 + o.q11, self.q12 + o.q12, self.q21 + o.q21, self.q22 + o.q22)
    }
}

impl Sub for Complex2x2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.q11 - o.q11, self.q12 - o.q12, self.q21 - o.q21, self.q22 - o.q22)
    }
}

impl Neg for Complex2x2 {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.q11, -self.q12, -self.q21, -self.q22)
    }
}

impl Mul for Complex2x2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.q11 * o.q11 + self.q12 * o.q21,
            self.q11 * o.q12 + self.q12 * o.q22,
            self.q21 * o.q11 + self.q22 * o.q21,
            self.q21 * o.q12 + self.q22 * o.q22,
        )
    }
}

/// Block Green's function in the `(a, b)` parametrization
/// `[[a, i b], [i b̄, ā]]`.
///
/// `a` is the diagonal element `G₁₁` (the physical Green's function) and
/// `i b` the off-diagonal element `G₁₁̄`. The product of the off-diagonal
/// elements gives the eigenvector correlator `|b|²`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct QuaternionicGreen {
    pub a: Complex64,
    pub b: Complex64,
}

impl QuaternionicGreen {
    pub const fn new(a: Complex64, b: Complex64) -> Self {
        Self { a, b }
    }

    pub fn holomorphic(a: Complex64) -> Self {
        Self::new(a, Complex64::default())
    }

    pub fn embed(&self) -> Complex2x2 {
        Complex2x2::new(self.a, I * self.b, I * self.b.conj(), self.a.conj())
    }

    /// Reads `(a, b)` back from the 11 and 12 entries. The other two entries
    /// are ignored; see [`QuaternionicGreen::structure_defect`].
    pub fn extract(m: &Complex2x2) -> Self {
        Self::new(m.q11, -I * m.q12)
    }

    /// How far `m` is from the quaternionic form, as the largest entrywise
    /// violation of `q22 = conj(q11)` and `q21 = i·conj(b)`.
    pub fn structure_defect(m: &Complex2x2) -> f64 {
        let g = Self::extract(m);
        (m.q22 - g.a.conj()).norm().max((m.q21 - I * g.b.conj()).norm())
    }

    /// `|a|² + |b|²`, the determinant of the embedding.
    pub fn det(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }

    pub fn correlator(&self) -> f64 {
        self.b.norm_sqr()
    }
}

/// A non-zero spectral point together with its principal square root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub z: Complex64,
    /// Principal root, `w² = z`, `Re w ≥ 0`.
    pub w: Complex64,
    /// `Arg z ∈ (-π, π]`.
    pub phi: f64,
    /// `Arg w = phi / 2`.
    pub psi: f64,
}

impl PhasePoint {
    pub fn rotation(&self) -> URotation {
        URotation::new(self.psi)
    }
}

/// Splits `z = w²` on the principal branch.
pub fn phase_split(z: Complex64) -> Result<PhasePoint> {
    if z.re == 0.0 && z.im == 0.0 {
        return Err(Error::OriginExcluded);
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite spectral point {z}")));
    }
    // atan2 returns -π for (-x, -0.0); fold it onto +π
    let mut phi = z.im.atan2(z.re);
    if phi <= -PI {
        phi = PI;
    }
    let psi = 0.5 * phi;
    let w = Complex64::from_polar(z.norm().sqrt(), psi);
    Ok(PhasePoint { z, w, phi, psi })
}

/// Conjugation by `U = diag(e^{iψ/2}, e^{-iψ/2})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct URotation {
    pub psi: f64,
    phase: Complex64,
}

impl URotation {
    pub fn new(psi: f64) -> Self {
        Self { psi, phase: Complex64::from_polar(1.0, psi) }
    }

    pub fn matrix(&self) -> Complex2x2 {
        let half = Complex64::from_polar(1.0, 0.5 * self.psi);
        Complex2x2::diag(half, half.conj())
    }

    /// `[X]^L = U X U†`: q12 picks up `e^{iψ}`, q21 picks up `e^{-iψ}`.
    pub fn left(&self, x: &Complex2x2) -> Complex2x2 {
        Complex2x2::new(x.q11, x.q12 * self.phase, x.q21 * self.phase.conj(), x.q22)
    }

    /// `[X]^R = U† X U`.
    pub fn right(&self, x: &Complex2x2) -> Complex2x2 {
        Complex2x2::new(x.q11, x.q12 * self.phase.conj(), x.q21 * self.phase, x.q22)
    }
}
