use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::solver::NonHermSolution;
use super::MatrixRMap;
use crate::algebra::{phase_split, Complex2x2, URotation};
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-13;
const MAX_ITERATIONS: usize = 2_000;
/// Commutators below this size count as commuting.
const COMMUTING: f64 = 1e-10;

fn to_vec(m: &Complex2x2) -> DVector<f64> {
    DVector::from_iterator(8, m.entries().iter().flat_map(|e| [e.re, e.im]))
}

fn from_vec(x: &DVector<f64>) -> Complex2x2 {
    let e = |k: usize| Complex64::new(x[2 * k], x[2 * k + 1]);
    Complex2x2::new(e(0), e(1), e(2), e(3))
}

/// Solves the matrix fixed point `S = map(S)` by damped iteration from
/// `diag(1/κ₁, 1/κ̄₁)`, finishing with Newton.
fn matrix_fixed_point<F>(rmap: &MatrixRMap, map: F) -> Result<Complex2x2>
where
    F: Fn(&Complex2x2) -> Result<Complex2x2>,
{
    if rmap.is_centered() {
        return Err(Error::CenteredSTransform { kappa1: rmap.kappa1() });
    }
    let k = rmap.kappa1();
    let mut s = Complex2x2::diag(k.inv(), k.conj().inv());
    let residual = |s: &Complex2x2| map(s).map(|m| m.max_abs_diff(s)).unwrap_or(f64::INFINITY);
    let mut res = residual(&s);
    for _ in 0..MAX_ITERATIONS {
        if res <= TOLERANCE {
            return Ok(s);
        }
        if res < 1e-3 {
            let x = to_vec(&s);
            let f = |x: &DVector<f64>| -> Option<DVector<f64>> {
                let s = from_vec(x);
                map(&s).ok().map(|m| to_vec(&m) - x)
            };
            if let Some(r) = f(&x) {
                let mut j = DMatrix::zeros(8, 8);
                let mut ok = true;
                for c in 0..8 {
                    let h = 1e-7 * x[c].abs().max(1.0);
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[c] += h;
                    xm[c] -= h;
                    match (f(&xp), f(&xm)) {
                        (Some(p), Some(m)) => j.set_column(c, &((p - m) / (2.0 * h))),
                        _ => ok = false,
                    }
                }
                if ok {
                    if let Some(step) = j.lu().solve(&(-r)) {
                        let trial = from_vec(&(x + step));
                        let trial_res = residual(&trial);
                        if trial_res < res {
                            s = trial;
                            res = trial_res;
                            continue;
                        }
                    }
                }
            }
        }
        let next = map(&s)?;
        s = (s + next).scale(Complex64::new(0.5, 0.0));
        res = residual(&s);
    }
    if res <= TOLERANCE * 1e3 {
        Ok(s)
    } else {
        Err(Error::NonConvergence {
            what: "matrix S transform",
            iterations: MAX_ITERATIONS,
            residual: res,
        })
    }
}

/// Left S transform: `S = 1 / R^L([S·Y]^R)`.
pub fn s_left(rmap: &MatrixRMap, y: &Complex2x2, u: &URotation) -> Result<Complex2x2> {
    matrix_fixed_point(rmap, |s| u.left(&rmap.apply(&u.right(&(*s * *y)))).invert())
}

/// Right S transform: `S = 1 / R^R([Y·S]^L)`.
pub fn s_right(rmap: &MatrixRMap, y: &Complex2x2, u: &URotation) -> Result<Complex2x2> {
    matrix_fixed_point(rmap, |s| u.right(&rmap.apply(&u.left(&(*y * *s)))).invert())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub z: Complex64,
    /// Residual of the product law itself.
    pub product_law_residual: f64,
    /// `None` when a factor is centered and its S transform is undefined.
    pub s_defined: bool,
    pub note: Option<String>,
    /// Largest entry of `1/R_M(G) - S⁽ᴿ⁾_B(G R_M) S⁽ᴸ⁾_A(R_M G)`.
    pub factorization_residual: Option<f64>,
    /// Largest entry of `[G, R_M(G)]`.
    pub commutator: f64,
    /// Residual of `1/R_M = S⁽ᴿ⁾_B(Y) S⁽ᴸ⁾_A(Y)` with the common argument
    /// `Y = R_M G`, evaluated only when `G` and `R_M` commute.
    pub commuting_residual: Option<f64>,
}

/// Evaluates the left/right S-transform factorization of the product law
/// at a converged solution.
pub fn residual_identities(sol: &NonHermSolution, a: &MatrixRMap, b: &MatrixRMap) -> Result<IdentityReport> {
    let u = phase_split(sol.z)?.rotation();
    let g = sol.gm.embed();
    let rm = u.left(&a.apply_green(&sol.gb)) * u.right(&b.apply_green(&sol.ga));
    let commutator = g.commutator(&rm).max_abs();
    let mut report = IdentityReport {
        z: sol.z,
        product_law_residual: sol.residual,
        s_defined: true,
        note: None,
        factorization_residual: None,
        commutator,
        commuting_residual: None,
    };
    if a.is_centered() || b.is_centered() {
        report.s_defined = false;
        report.note = Some("S undefined: centered factor".into());
        return Ok(report);
    }
    let lhs = rm.invert()?;
    let sl = s_left(a, &(rm * g), &u)?;
    let sr = s_right(b, &(g * rm), &u)?;
    report.factorization_residual = Some(lhs.max_abs_diff(&(sr * sl)));
    if commutator <= COMMUTING {
        let y = rm * g;
        let sl = s_left(a, &y, &u)?;
        let sr = s_right(b, &y, &u)?;
        report.commuting_residual = Some(lhs.max_abs_diff(&(sr * sl)));
    }
    Ok(report)
}
