use std::f64::consts::PI;

use freeconv::ensembles::{analytic_transforms, EnsembleSpec};
use freeconv::grid::Grid;
use freeconv::hermitian::{
    density_real, free_add, green_from_r, multiply_r_system, multiply_via_s, s_from_green, s_from_r, ScalarTransform,
};
use freeconv::montecarlo::trace_moments;
use freeconv::nonhermitian::{
    boundary_curve, boundary_curve_single, density_at, density_field, eigenvector_correlator, elliptic_rmap,
    ginibre_rmap, gue_rmap, limacon_reference, residual_identities, shifted_rmap, solve_product, solve_single, Branch,
    DensityMethod,
};
use freeconv::{Complex64, Error, QuaternionicGreen};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn one_plus_g() -> ScalarTransform {
    ScalarTransform::shifted_gaussian(c(1.0, 0.0), 1.0)
}

fn closed_s(y: f64) -> f64 {
    (-1.0 + (1.0 + 4.0 * y).sqrt()) / (2.0 * y)
}

#[test]
fn green_functions() {
    assert!((green_from_r(&ScalarTransform::zero(), c(2.0, 0.0)).unwrap().g - 0.5).norm() < 1e-12);
    assert!((green_from_r(&ScalarTransform::constant(c(1.0, 0.0)), c(3.0, 0.0)).unwrap().g - 0.5).norm() < 1e-12);
    let z = c(2.0, 0.001);
    let disc = (z * z - 4.0).sqrt();
    let oracle = [(z - disc) / 2.0, (z + disc) / 2.0]
        .into_iter()
        .find(|g| g.norm() <= 1.0)
        .unwrap();
    assert!((green_from_r(&ScalarTransform::gue(), z).unwrap().g - oracle).norm() < 1e-10);
}

#[test]
fn real_line_densities() {
    let gue = ScalarTransform::gue();
    assert!((density_real(&gue, 0.0, 1e-6).unwrap() - 1.0 / PI).abs() < 1e-5);
    assert!(density_real(&gue, 2.5, 1e-6).unwrap().abs() < 1e-4);
    let point_mass = density_real(&ScalarTransform::identity(), 1.0, 1e-3).unwrap();
    assert!((point_mass / (1.0 / (PI * 1e-3)) - 1.0).abs() < 0.01);
    let double = free_add(&gue, &gue);
    assert!((density_real(&double, 0.0, 1e-6).unwrap() - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-5);
    let shifted = free_add(&ScalarTransform::identity(), &gue);
    for g in [c(0.3, -0.2), c(-1.0, 0.5)] {
        assert!((shifted.r(g) - one_plus_g().r(g)).norm() < 1e-15);
        assert!((free_add(&ScalarTransform::zero(), &gue).r(g) - gue.r(g)).norm() < 1e-15);
    }
}

#[test]
fn hermitian_products() {
    let gue = ScalarTransform::gue();
    for z in [c(0.5, 0.2), c(-2.0, 1.0), c(0.1, -3.0)] {
        let p = multiply_r_system(&gue, &gue, z).unwrap();
        assert!((p.g - z.inv()).norm() < 1e-10);
        assert!(p.g_a.norm() < 1e-10 && p.g_b.norm() < 1e-10);
        let b = one_plus_g();
        let with_identity = multiply_r_system(&ScalarTransform::identity(), &b, z).unwrap();
        assert!((with_identity.g - green_from_r(&b, z).unwrap().g).norm() < 1e-9);
    }
    // first moment of G about infinity: z·(z G - 1) → m₁
    let t = one_plus_g();
    let z = c(1e3, 1e3);
    let m1 = z * (z * multiply_r_system(&t, &t, z).unwrap().g - 1.0);
    assert!((m1 - 1.0).norm() < 1e-2);
    let spec = EnsembleSpec::shifted(1.0, 1.0, c(1.0, 0.0), 256);
    let sampled = trace_moments(&spec, &spec, 200, 17, 1).unwrap();
    assert!(sampled[0].z_score(c(1.0, 0.0)) <= 3.0, "{:?}", sampled[0]);
}

#[test]
fn s_transforms() {
    let t = one_plus_g();
    let golden = closed_s(1.0);
    assert!((s_from_r(&ScalarTransform::constant(c(2.0, 0.0)), c(0.7, 0.1)).unwrap() - 0.5).norm() < 1e-12);
    assert!((s_from_r(&t, c(1.0, 0.0)).unwrap() - golden).norm() < 1e-10);
    assert!((s_from_r(&t, c(1e-8, 0.0)).unwrap() - closed_s(1e-8)).norm() < 1e-7);
    assert!((s_from_green(&t, c(1.0, 0.0)).unwrap() - golden).norm() < 1e-8);
    assert!((s_from_green(&ScalarTransform::constant(c(2.0, 0.0)), c(2.0, 0.0)).unwrap() - 0.5).norm() < 1e-8);
    assert!((s_from_green(&t, c(0.25, 0.0)).unwrap() - 2.0 * (2f64.sqrt() - 1.0)).norm() < 1e-8);
    let id = ScalarTransform::identity();
    assert!((multiply_via_s(&id, &id, c(0.4, 0.3)).unwrap() - 1.0).norm() < 1e-12);
    assert!((multiply_via_s(&t, &id, c(1.0, 0.0)).unwrap() - golden).norm() < 1e-10);
    assert!((multiply_via_s(&t, &t, c(1.0, 0.0)).unwrap() - golden * golden).norm() < 1e-10);
    assert!(matches!(s_from_r(&ScalarTransform::gue(), c(1.0, 0.0)), Err(Error::CenteredSTransform { .. })));
}

#[test]
fn single_ensemble_solutions() {
    let g = ginibre_rmap(1.0).unwrap();
    let z = Complex64::from_polar(0.5, 0.7);
    let s = solve_single(&g, z).unwrap();
    assert!((s.gm.a - z.conj()).norm() < 1e-10);
    assert!((s.gm.b.norm_sqr() - 0.75).abs() < 1e-10);
    let far = solve_single(&g, c(2.0, 0.0)).unwrap();
    assert!((far.gm.a - 0.5).norm() < 1e-12 && far.gm.b.norm() < 1e-12);
    let gue = gue_rmap(1.0).unwrap();
    let herm = solve_single(&gue, c(0.0, 0.5)).unwrap();
    let oracle = green_from_r(&ScalarTransform::gue(), c(0.0, 0.5)).unwrap().g;
    assert!((herm.gm.a - oracle).norm() < 1e-8);
    assert!((eigenvector_correlator(&solve_single(&g, c(1e-9, 0.0)).unwrap().gm) - 1.0).abs() < 1e-9);
    assert_eq!(eigenvector_correlator(&QuaternionicGreen::holomorphic(c(0.3, 0.1))), 0.0);
}

#[test]
fn product_solutions() {
    let g = ginibre_rmap(1.0).unwrap();
    let z = Complex64::from_polar(0.25, 2.5);
    let s = solve_product(&g, &g, z).unwrap();
    // the phase of sqrt(z̄/z) is e^{-iφ}
    assert!((s.g11() - z.conj() / z.norm()).norm() < 1e-10);
    assert!((s.correlator - 0.75).abs() < 1e-10);
    let gue = gue_rmap(1.0).unwrap();
    let h = solve_product(&gue, &gue, z).unwrap();
    assert!((h.g11() - s.g11()).norm() < 1e-10 && (h.correlator - s.correlator).abs() < 1e-10);
    let far = solve_product(&g, &g, c(0.0, 4.0)).unwrap();
    assert!((far.g11() - c(0.0, 4.0).inv()).norm() < 1e-12);
    assert_eq!(far.correlator, 0.0);
    assert_eq!(far.branch, Branch::Holomorphic);
    assert!((solve_product(&g, &g, c(0.5, 0.0)).unwrap().correlator - 0.5).abs() < 1e-10);
    let m = shifted_rmap(&g, c(1.0, 0.0));
    // C(r, 0) solves C² + (1+2r)C + r² − 3r = 0
    for r in [0.5f64, 1.0, 2.0] {
        let b = 1.0 + 2.0 * r;
        let root = (-b + (b * b - 4.0 * (r * r - 3.0 * r)).sqrt()) / 2.0;
        assert!((solve_product(&m, &m, c(r, 0.0)).unwrap().correlator - root).abs() < 1e-9);
    }
    assert!((limacon_reference(0.5, 0.0).c - 0.5).abs() < 1e-15);
    assert!(limacon_reference(3.0, 0.0).c.abs() < 1e-15);
}

#[test]
fn boundaries() {
    let g = ginibre_rmap(1.0).unwrap();
    for ray in boundary_curve(&g, &g, 32, 1e-7).unwrap() {
        assert!((ray.r.unwrap() - 1.0).abs() <= 1e-7);
    }
    for ray in boundary_curve_single(&g, 16, 1e-7).unwrap() {
        assert!((ray.r.unwrap() - 1.0).abs() <= 1e-7, "{ray:?}");
    }
    let m = shifted_rmap(&g, c(1.0, 0.0));
    let phis: Vec<f64> = (0..9).map(|k| -2.0 + 0.5 * k as f64).collect();
    for ray in freeconv::nonhermitian::boundary_curve_at(&m, &m, &phis, 1e-7) {
        assert!((ray.r.unwrap() - (1.0 + 2.0 * ray.phi.cos())).abs() < 1e-3, "{ray:?}");
    }
    assert!(matches!(boundary_curve(&g, &g, 7, 1e-6), Err(Error::InvalidSpec(_))));
}

#[test]
fn densities() {
    let g = ginibre_rmap(1.0).unwrap();
    let p = density_at(&g, &g, c(0.5, 0.0), DensityMethod::FiniteDifference, None).unwrap();
    assert!((p.rho - 1.0 / PI).abs() < 1e-8);
    let m = shifted_rmap(&g, c(1.0, 0.0));
    for z in [c(3.5, 0.0), c(-1.0, 0.5), c(0.0, 2.5)] {
        for method in [DensityMethod::ClosedForm, DensityMethod::FiniteDifference] {
            assert!(density_at(&m, &m, z, method, None).unwrap().rho.abs() < 1e-6);
        }
    }
    let near = density_at(&m, &m, c(1e-5, 0.0), DensityMethod::FiniteDifference, None).unwrap();
    assert!((near.rho - 6.0 / PI).abs() < 1e-3);
    assert!((limacon_reference(3.0, 0.0).rho - 9.0 / (56.0 * PI)).abs() < 1e-15);
    let grid = Grid::polar((0.0, 2.0), 4, (-PI, PI), 4);
    let field = density_field(&g, &g, &grid, None).unwrap();
    assert_eq!(field.method, DensityMethod::ClosedForm);
    let bad = Grid::cartesian((-1.0, 1.0), 3, (-1.0, 1.0), 3);
    assert!(matches!(density_field(&g, &g, &bad, None), Err(Error::OriginExcluded)));
}

#[test]
fn identities() {
    let g = ginibre_rmap(1.0).unwrap();
    let m = shifted_rmap(&g, c(1.0, 0.0));
    let sol = solve_product(&m, &m, c(0.8, 0.6)).unwrap();
    let report = residual_identities(&sol, &m, &m).unwrap();
    assert!(report.factorization_residual.unwrap() <= 1e-8);
    let centered = residual_identities(&solve_product(&g, &g, c(0.3, 0.3)).unwrap(), &g, &g).unwrap();
    assert!(!centered.s_defined);
    assert!(centered.product_law_residual <= 1e-9);
}

#[test]
fn transforms_follow_the_spec() {
    let gue = analytic_transforms(&EnsembleSpec::gue(1.0, 10)).unwrap();
    let elliptic = elliptic_rmap(1.0, 1.0).unwrap();
    assert_eq!((gue.matrix.sigma, gue.matrix.tau, gue.matrix.shift), (elliptic.sigma, elliptic.tau, elliptic.shift));
    assert!(gue.scalar.is_some());
    let shifted = analytic_transforms(&EnsembleSpec::shifted(1.0, 0.0, c(1.0, 0.0), 10)).unwrap();
    assert!(shifted.scalar.is_none());
    assert_eq!(shifted.matrix.shift, c(1.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ginibre_product_is_rotation_invariant(r in 0.05f64..0.95, phi in -3.1f64..3.1) {
        let g = ginibre_rmap(1.0).unwrap();
        let s = solve_product(&g, &g, Complex64::from_polar(r, phi)).unwrap();
        prop_assert!((s.correlator - (1.0 - r)).abs() <= 1e-9);
        prop_assert!(s.residual <= 1e-9);
    }

    #[test]
    fn limacon_solver_matches_closed_form(u in 0.05f64..0.95, phi in -2.0f64..2.0) {
        let m = shifted_rmap(&ginibre_rmap(1.0).unwrap(), c(1.0, 0.0));
        let r = u * (1.0 + 2.0 * phi.cos());
        let s = solve_product(&m, &m, Complex64::from_polar(r, phi)).unwrap();
        let reference = limacon_reference(r, phi);
        prop_assert!((s.correlator - reference.c).abs() <= 1e-8);
        prop_assert!((s.g11() - reference.g).norm() <= 1e-8);
    }

    #[test]
    fn s_matches_closed_form(y in 0.01f64..4.0) {
        let s = s_from_r(&one_plus_g(), c(y, 0.0)).unwrap();
        prop_assert!((s - closed_s(y)).norm() <= 1e-10);
    }
}
