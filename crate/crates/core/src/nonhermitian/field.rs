use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::limacon::limacon_reference;
use super::solver::{solve_product, solve_product_with, solve_single, Branch, NonHermSolution, SolverOptions};
use super::MatrixRMap;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par;

/// Share of grid points allowed to fail before a field is rejected.
pub const HOLE_LIMIT: f64 = 0.05;
/// Relative step of the finite-difference stencil.
pub const RELATIVE_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMethod {
    ClosedForm,
    FiniteDifference,
    /// Histogram of sampled eigenvalues.
    Empirical,
}

/// Ensemble pairs with a closed-form product density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegisteredPair {
    /// Two centered elliptic factors: uniform `1/(2π s |z|)` on `|z| ≤ s`,
    /// `s = σ_A σ_B`.
    CenteredElliptic { s: f64 },
    /// Two Ginibre factors of unit variance shifted by the identity.
    Limacon,
}

impl RegisteredPair {
    pub fn detect(a: &MatrixRMap, b: &MatrixRMap) -> Option<Self> {
        let unit_shifted = |m: &MatrixRMap| m.sigma == 1.0 && m.tau == 0.0 && m.shift == Complex64::new(1.0, 0.0);
        if unit_shifted(a) && unit_shifted(b) {
            return Some(RegisteredPair::Limacon);
        }
        let circular = |m: &MatrixRMap| m.is_centered() && (m.tau == 0.0 || m.tau == 1.0);
        if circular(a) && circular(b) {
            return Some(RegisteredPair::CenteredElliptic { s: a.sigma * b.sigma });
        }
        None
    }

    pub fn evaluate(&self, z: Complex64) -> PointDensity {
        match *self {
            RegisteredPair::CenteredElliptic { s } => {
                let r = z.norm();
                if r <= s {
                    PointDensity {
                        z,
                        g11: Complex64::from_polar(1.0 / s, -z.arg()),
                        rho: 1.0 / (2.0 * PI * s * r),
                        rot: 0.0,
                        correlator: (s - r) / (s * s),
                        inside: true,
                    }
                } else {
                    PointDensity {
                        z,
                        g11: z.inv(),
                        rho: 0.0,
                        rot: 0.0,
                        correlator: 0.0,
                        inside: false,
                    }
                }
            }
            RegisteredPair::Limacon => {
                let p = limacon_reference(z.norm(), z.arg());
                PointDensity {
                    z,
                    g11: p.g,
                    rho: p.rho,
                    rot: p.rot,
                    correlator: p.c,
                    inside: p.inside && p.c > 0.0,
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointDensity {
    pub z: Complex64,
    pub g11: Complex64,
    pub rho: f64,
    pub rot: f64,
    pub correlator: f64,
    pub inside: bool,
}

fn stencil_derivative(f: [f64; 4], h: f64) -> f64 {
    // fourth-order central difference from f(-2h), f(-h), f(h), f(2h)
    (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h)
}

/// Density of `AB` at `z` from the Gauss law `ρ = (∂ₓG_x + ∂_yG_y)/2π`
/// with `G₁₁ = G_x - iG_y`. The stencil step defaults to `1e-3·|z|`;
/// stencil points are warm-started from the center solution.
pub fn density_at(
    a: &MatrixRMap,
    b: &MatrixRMap,
    z: Complex64,
    method: DensityMethod,
    step: Option<f64>,
) -> Result<PointDensity> {
    if method == DensityMethod::Empirical {
        return Err(Error::InvalidArgument("empirical densities come from eigenvalue histograms".into()));
    }
    if method == DensityMethod::ClosedForm {
        if z.norm() == 0.0 {
            return Err(Error::OriginExcluded);
        }
        let pair = RegisteredPair::detect(a, b).ok_or_else(|| {
            Error::InvalidArgument(format!("no closed form registered for {} x {}", a.name, b.name))
        })?;
        return Ok(pair.evaluate(z));
    }
    let center = solve_product(a, b, z)?;
    let h = step.unwrap_or(RELATIVE_STEP * z.norm());
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("stencil step must be positive, got {h}")));
    }
    let options = SolverOptions {
        seed: Some((center.ga, center.gb)),
        ..Default::default()
    };
    let g_at = |dz: Complex64| -> Result<Complex64> { Ok(solve_product_with(a, b, z + dz, &options)?.g11()) };
    let mut along_x = [Complex64::default(); 4];
    let mut along_y = [Complex64::default(); 4];
    for (k, m) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
        along_x[k] = g_at(Complex64::new(m * h, 0.0))?;
        along_y[k] = g_at(Complex64::new(0.0, m * h))?;
    }
    // G_x = Re G, G_y = -Im G
    let dgx_dx = stencil_derivative(along_x.map(|g| g.re), h);
    let dgy_dy = stencil_derivative(along_y.map(|g| -g.im), h);
    let dgy_dx = stencil_derivative(along_x.map(|g| -g.im), h);
    let dgx_dy = stencil_derivative(along_y.map(|g| g.re), h);
    Ok(PointDensity {
        z,
        g11: center.g11(),
        rho: (dgx_dx + dgy_dy) / (2.0 * PI),
        rot: dgy_dx - dgx_dy,
        correlator: center.correlator,
        inside: center.branch == Branch::Nonholomorphic,
    })
}

/// Density sampled on a grid. Failed points are holes: NaN in every field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityField {
    pub grid: Grid,
    pub method: DensityMethod,
    pub points: Vec<Complex64>,
    pub g11: Vec<Complex64>,
    pub rho: Vec<f64>,
    pub rot_residual: Vec<f64>,
    pub correlator: Vec<f64>,
    pub inside: Vec<bool>,
    pub holes: usize,
    /// Eigenvalue counts per cell for empirical fields.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<u64>>,
    /// Eigenvalues binned, including those outside the grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<u64>,
}

impl DensityField {
    /// `Σ ρ·area` over the grid, skipping holes.
    pub fn integral(&self) -> f64 {
        self.rho
            .iter()
            .zip(self.grid.areas())
            .filter(|(r, _)| r.is_finite())
            .map(|(r, a)| r * a)
            .sum()
    }

    pub fn is_hole(&self, k: usize) -> bool {
        !self.rho[k].is_finite()
    }
}

/// Solves the product law at every grid point. The closed form is used for
/// registered pairs unless `method` asks otherwise.
pub fn density_field(a: &MatrixRMap, b: &MatrixRMap, grid: &Grid, method: Option<DensityMethod>) -> Result<DensityField> {
    grid.validate(3)?;
    grid.validate_excludes_origin()?;
    let method = method.unwrap_or(if RegisteredPair::detect(a, b).is_some() {
        DensityMethod::ClosedForm
    } else {
        DensityMethod::FiniteDifference
    });
    let points = grid.points();
    let results = par::map(&points, |&z| density_at(a, b, z, method, None));
    if method == DensityMethod::ClosedForm {
        if let Some(Err(e)) = results.iter().find(|r| r.is_err()) {
            return Err(Error::InvalidArgument(e.to_string()));
        }
    }
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let mut field = DensityField {
        grid: grid.clone(),
        method,
        points: points.clone(),
        g11: Vec::with_capacity(points.len()),
        rho: Vec::with_capacity(points.len()),
        rot_residual: Vec::with_capacity(points.len()),
        correlator: Vec::with_capacity(points.len()),
        inside: Vec::with_capacity(points.len()),
        holes: 0,
        counts: None,
        total: None,
    };
    for r in results {
        match r {
            Ok(p) => {
                field.g11.push(p.g11);
                field.rho.push(p.rho);
                field.rot_residual.push(p.rot.abs());
                field.correlator.push(p.correlator);
                field.inside.push(p.inside);
            }
            Err(_) => {
                field.holes += 1;
                field.g11.push(nan);
                field.rho.push(f64::NAN);
                field.rot_residual.push(f64::NAN);
                field.correlator.push(f64::NAN);
                field.inside.push(false);
            }
        }
    }
    if field.holes as f64 > HOLE_LIMIT * points.len() as f64 {
        return Err(Error::TooManyHoles {
            failed: field.holes,
            total: points.len(),
        });
    }
    Ok(field)
}

/// Outermost support crossing along one ray; `None` when the ray never
/// enters the support or never leaves it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryRay {
    pub phi: f64,
    pub r: Option<f64>,
}

/// Coarse samples per ray before bisection.
const RAY_SAMPLES: usize = 64;

fn trace_ray<F>(solve: &F, phi: f64, r_max: f64, tolerance: f64) -> BoundaryRay
where
    F: Fn(Complex64) -> Result<NonHermSolution>,
{
    let inside = |r: f64| {
        solve(Complex64::from_polar(r, phi))
            .map(|s| s.branch == Branch::Nonholomorphic)
            .unwrap_or(false)
    };
    let none = BoundaryRay { phi, r: None };
    if inside(r_max) {
        return none;
    }
    let mut outer = r_max;
    let mut inner = None;
    for k in (1..RAY_SAMPLES).rev() {
        let r = r_max * k as f64 / RAY_SAMPLES as f64;
        if inside(r) {
            inner = Some(r);
            break;
        }
        outer = r;
    }
    let Some(mut inner) = inner else { return none };
    while outer - inner > tolerance {
        let mid = 0.5 * (inner + outer);
        if inside(mid) {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    BoundaryRay {
        phi,
        r: Some(0.5 * (inner + outer)),
    }
}

/// Support boundary of `AB` along the given rays, located as the outermost
/// switch between the holomorphic and nonholomorphic branches.
pub fn boundary_curve_at(a: &MatrixRMap, b: &MatrixRMap, phis: &[f64], tolerance: f64) -> Vec<BoundaryRay> {
    let r_max = 1.25 * a.spectral_radius_bound() * b.spectral_radius_bound() + 0.1;
    par::map(phis, |&phi| trace_ray(&|z| solve_product(a, b, z), phi, r_max, tolerance))
}

/// Boundary along `angular_samples` equally spaced rays starting at `φ = -π`.
pub fn boundary_curve(a: &MatrixRMap, b: &MatrixRMap, angular_samples: usize, tolerance: f64) -> Result<Vec<BoundaryRay>> {
    Ok(boundary_curve_at(a, b, &ray_angles(angular_samples, tolerance)?, tolerance))
}

/// Boundary of a single ensemble's spectrum.
pub fn boundary_curve_single(m: &MatrixRMap, angular_samples: usize, tolerance: f64) -> Result<Vec<BoundaryRay>> {
    let phis = ray_angles(angular_samples, tolerance)?;
    let r_max = 1.25 * m.spectral_radius_bound() + 0.1;
    Ok(par::map(&phis, |&phi| trace_ray(&|z| solve_single(m, z), phi, r_max, tolerance)))
}

fn ray_angles(n: usize, tolerance: f64) -> Result<Vec<f64>> {
    let mut problems = Vec::new();
    if n < 8 {
        problems.push(format!("angular_samples must be at least 8, got {n}"));
    }
    if !(tolerance > 0.0) {
        problems.push(format!("radial_tolerance must be positive, got {tolerance}"));
    }
    if !problems.is_empty() {
        return Err(Error::InvalidSpec(problems));
    }
    Ok((0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect())
}
