//! Closed forms for the product of two Ginibre matrices shifted by the
//! identity, whose support is bounded by Pascal's limaçon `r = 1 + 2cos φ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::dual::Dual;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimaconPoint {
    /// Eigenvector correlator `|b|²`.
    pub c: f64,
    pub d: f64,
    /// `G₁₁ = G_x - i G_y`.
    pub g: Complex64,
    pub rho: f64,
    /// `∂ₓG_y - ∂_yG_x`, zero up to rounding.
    pub rot: f64,
    pub inside: bool,
}

pub fn inside_limacon(r: f64, phi: f64) -> bool {
    r <= 1.0 + 2.0 * phi.cos()
}

/// Closed-form correlator, Green's function and density at `z = r e^{iφ}`.
///
/// The density is differentiated exactly with dual numbers. Points on the
/// curve use the interior formula, so they return the limit from inside.
/// At `r = 0` the density has a direction-dependent limit
/// `3(1 + cos φ)/π`, returned here.
pub fn limacon_reference(r: f64, phi: f64) -> LimaconPoint {
    let cp = phi.cos();
    let inside = inside_limacon(r, phi);
    if r == 0.0 {
        return LimaconPoint {
            c: 0.0,
            d: 1.0,
            g: Complex64::new(-1.0, 0.0),
            rho: 3.0 * (1.0 + cp) / PI,
            rot: 0.0,
            inside,
        };
    }
    let z = Complex64::from_polar(r, phi);
    if !inside {
        return LimaconPoint {
            c: 0.0,
            d: (z - 1.0).norm_sqr(),
            g: (z - 1.0).inv(),
            rho: 0.0,
            rot: 0.0,
            inside,
        };
    }
    let (x, y) = (Dual::x(z.re), Dual::y(z.im));
    let rd = (x * x + y * y).sqrt();
    let (cos, sin) = (x / rd, y / rd);
    let c = ((Dual::constant(1.0) + rd * (cos + 1.0) * 8.0).sqrt() - rd * 2.0 - 1.0) * 0.5;
    let rc = rd + c;
    let u = rc * cos - 1.0;
    let v = rc * sin;
    let d = u * u + v * v + c * (cos + 1.0) * 2.0;
    let gx = u / d;
    let gy = v / d;
    LimaconPoint {
        c: c.v.max(0.0),
        d: d.v,
        g: Complex64::new(gx.v, -gy.v),
        rho: (gx.dx + gy.dy) / (2.0 * PI),
        rot: gy.dx - gx.dy,
        inside,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_at_landmarks() {
        let origin = limacon_reference(0.0, 0.0);
        assert!((origin.rho - 6.0 / PI).abs() < 1e-12);
        assert!((origin.rho - 1.909_86).abs() < 1e-5);

        let tip = limacon_reference(3.0, 0.0);
        assert_eq!(tip.c, 0.0);
        assert!((tip.rho - 9.0 / (56.0 * PI)).abs() < 1e-12);
        assert!((tip.rho - 0.051_156_9).abs() < 1e-7);
    }

    #[test]
    fn correlator_matches_quadratic_root() {
        // C² + (1 + 2r) C + r² - r(1 + 2cos φ) = 0
        let p = limacon_reference(0.5, 0.0);
        let (b, q) = (2.0f64, 0.25 - 1.5);
        let root = (-b + (b * b - 4.0 * q).sqrt()) / 2.0;
        assert!((p.c - root).abs() < 1e-14);
        assert!((p.c - 0.5).abs() < 1e-15);
        assert!((limacon_reference(1.0, 0.0).c - (17f64.sqrt() - 3.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn directional_limit_at_origin() {
        for phi in [0.0, 0.3, -1.0, 1.5] {
            let near = limacon_reference(1e-9, phi);
            assert!((near.rho - limacon_reference(0.0, phi).rho).abs() < 1e-6, "phi={phi}");
        }
    }

    #[test]
    fn values_against_independent_evaluation() {
        // finite differences of the closed form at fixed points
        let g = |x: f64, y: f64| limacon_reference(x.hypot(y), y.atan2(x)).g;
        for &(x, y) in &[(0.5, 0.3), (1.0, -0.7), (2.0, 0.1)] {
            let p = limacon_reference(f64::hypot(x, y), f64::atan2(y, x));
            let h = 1e-5;
            let dgx = (g(x + h, y).re - g(x - h, y).re) / (2.0 * h);
            let dgy = (-g(x, y + h).im + g(x, y - h).im) / (2.0 * h);
            assert!((p.rho - (dgx + dgy) / (2.0 * PI)).abs() < 1e-7);
            assert!(p.rot.abs() < 1e-12);
        }
        assert!((limacon_reference(f64::hypot(0.5, 0.3), f64::atan2(0.3, 0.5)).rho - 0.230_212_070_578).abs() < 1e-10);
        assert!((limacon_reference(0.01, 0.0).rho - 1.686_384_069_31).abs() < 1e-10);
    }

    #[test]
    fn outside_is_trivial_branch() {
        let p = limacon_reference(1.0, 2.5);
        assert!(!p.inside);
        assert_eq!(p.rho, 0.0);
        let z = Complex64::from_polar(1.0, 2.5);
        assert!((p.g - (z - 1.0).inv()).norm() < 1e-15);
    }

    #[test]
    fn continuous_across_boundary() {
        for phi in [0.0, 0.5, -1.2, 2.0] {
            let rb = 1.0 + 2.0 * f64::cos(phi);
            let a = limacon_reference(rb * (1.0 - 1e-9), phi);
            let b = limacon_reference(rb * (1.0 + 1e-9), phi);
            assert!((a.g - b.g).norm() < 1e-6, "phi={phi}");
        }
    }
}
