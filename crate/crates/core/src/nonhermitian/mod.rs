//! Non-hermitian ensembles in the 2×2 quaternionic formalism: matrix R maps,
//! the single-ensemble and product solvers, the eigenvector correlator,
//! support boundaries, densities via the Gauss law, and the left/right S
//! transform identities.

mod dual;
mod field;
mod identities;
mod limacon;
mod solver;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{Complex2x2, QuaternionicGreen};
use crate::error::{Error, Result};
use crate::hermitian::ScalarTransform;

pub use field::{
    boundary_curve, boundary_curve_at, boundary_curve_single, density_at, density_field, BoundaryRay, DensityField,
    DensityMethod, PointDensity, RegisteredPair, HOLE_LIMIT, RELATIVE_STEP,
};
pub use identities::{residual_identities, s_left, s_right, IdentityReport};
pub use limacon::{limacon_reference, LimaconPoint};
pub use solver::{
    eigenvector_correlator, solve_product, solve_product_with, solve_single, solve_single_with, Branch,
    NonHermSolution, SolverOptions,
};

/// Gaussian matrix R map `[[τσ²a + c, iσ²b], [iσ²b̄, τσ²ā + c̄]]`.
///
/// The shift enters as `diag(c, c̄)`, which keeps the quaternionic form for
/// complex `c` and equals `c·1` for real `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRMap {
    pub name: String,
    pub sigma: f64,
    pub tau: f64,
    pub shift: Complex64,
}

/// Elliptic ensemble: interpolates between Ginibre (`τ = 0`), GUE
/// (`τ = 1`) and anti-hermitian (`τ = -1`).
pub fn elliptic_rmap(sigma: f64, tau: f64) -> Result<MatrixRMap> {
    let mut problems = Vec::new();
    if !(sigma > 0.0 && sigma.is_finite()) {
        problems.push(format!("sigma must be positive, got {sigma}"));
    }
    if !(tau.abs() <= 1.0) {
        problems.push(format!("tau must lie in [-1, 1], got {tau}"));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidSpec(problems));
    }
    Ok(MatrixRMap {
        name: format!("elliptic(sigma={sigma}, tau={tau})"),
        sigma,
        tau,
        shift: Complex64::default(),
    })
}

pub fn ginibre_rmap(sigma: f64) -> Result<MatrixRMap> {
    let mut m = elliptic_rmap(sigma, 0.0)?;
    m.name = format!("ginibre(sigma={sigma})");
    Ok(m)
}

pub fn gue_rmap(sigma: f64) -> Result<MatrixRMap> {
    let mut m = elliptic_rmap(sigma, 1.0)?;
    m.name = format!("gue(sigma={sigma})");
    Ok(m)
}

pub fn shifted_rmap(base: &MatrixRMap, c: Complex64) -> MatrixRMap {
    if c == Complex64::default() {
        return base.clone();
    }
    MatrixRMap {
        name: format!("{}+{}", base.name, c),
        shift: base.shift + c,
        ..base.clone()
    }
}

impl MatrixRMap {
    pub fn kappa1(&self) -> Complex64 {
        self.shift
    }

    pub fn is_centered(&self) -> bool {
        self.shift.norm() <= 1e-12
    }

    /// Acts entrywise, so it is defined on any 2×2 matrix, not only on
    /// quaternionic ones.
    pub fn apply(&self, g: &Complex2x2) -> Complex2x2 {
        let v = self.sigma * self.sigma;
        let d = self.tau * v;
        Complex2x2::new(
            g.q11 * d + self.shift,
            g.q12 * v,
            g.q21 * v,
            g.q22 * d + self.shift.conj(),
        )
    }

    pub fn apply_green(&self, g: &QuaternionicGreen) -> Complex2x2 {
        self.apply(&g.embed())
    }

    /// Restriction to diagonal (holomorphic) arguments, `R(g) = c + τσ² g`.
    pub fn holomorphic_transform(&self) -> ScalarTransform {
        ScalarTransform::from_cumulants(
            self.name.clone(),
            vec![self.shift, Complex64::new(self.tau * self.sigma * self.sigma, 0.0)],
        )
    }

    /// Radius of a disc containing the spectrum.
    pub fn spectral_radius_bound(&self) -> f64 {
        self.shift.norm() + self.sigma * (1.0 + self.tau.abs())
    }

    fn same_law(&self, other: &MatrixRMap) -> bool {
        self.sigma == other.sigma && self.tau == other.tau && self.shift == other.shift
    }
}
