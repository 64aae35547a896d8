use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::MatrixRMap;
use crate::algebra::{phase_split, Complex2x2, QuaternionicGreen, URotation};
use crate::error::{Error, Result};

/// Off-diagonal modulus below which the nonholomorphic branch has collapsed.
pub const COLLAPSE: f64 = 1e-8;
/// Largest residual accepted as a solution.
pub const SUCCESS_RESIDUAL: f64 = 1e-9;
const POLISH_RESIDUAL: f64 = 1e-13;
const DAMPING: f64 = 0.5;
const SEED_B: f64 = 0.1;
const WARMUP_ITERATIONS: usize = 200;
const MAX_ITERATIONS: usize = 10_000;
const NEWTON_ITERATIONS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Holomorphic,
    Nonholomorphic,
}

/// Converged block Green's functions at one spectral point. For a single
/// ensemble `ga` and `gb` equal `gm`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonHermSolution {
    pub z: Complex64,
    pub gm: QuaternionicGreen,
    pub ga: QuaternionicGreen,
    pub gb: QuaternionicGreen,
    pub correlator: f64,
    pub branch: Branch,
    pub residual: f64,
}

impl NonHermSolution {
    /// `G₁₁` of the product, the physical Green's function.
    pub fn g11(&self) -> Complex64 {
        self.gm.a
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolverOptions {
    /// For identical factors, iterate with `G_A = G_B`. The unreduced
    /// residual is always re-checked.
    pub reduce_same: bool,
    /// Return this branch regardless of the selection protocol.
    pub force: Option<Branch>,
    /// Warm start `(G_A, G_B)`, typically a nearby solution.
    pub seed: Option<(QuaternionicGreen, QuaternionicGreen)>,
}

/// `C = -G₁₁̄ G₁̄₁ = |b|²`.
pub fn eigenvector_correlator(g: &QuaternionicGreen) -> f64 {
    g.correlator()
}

#[derive(Clone, Copy)]
enum Law<'a> {
    Single(&'a MatrixRMap),
    Product(&'a MatrixRMap, &'a MatrixRMap, URotation),
}

#[derive(Clone, Copy)]
struct System<'a> {
    law: Law<'a>,
    z: Complex64,
    pinned: bool,
    reduced: bool,
}

struct Eval {
    next: Vec<QuaternionicGreen>,
    gm: Complex2x2,
    residual: f64,
}

impl<'a> System<'a> {
    fn at(&self, z: Complex64) -> Self {
        Self { z, ..*self }
    }

    fn quaternions(&self) -> usize {
        match self.law {
            Law::Product(..) if !self.reduced => 2,
            _ => 1,
        }
    }

    fn dim(&self) -> usize {
        self.quaternions() * if self.pinned { 2 } else { 4 }
    }

    fn pack(&self, s: &[QuaternionicGreen]) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.dim());
        for g in s {
            v.extend([g.a.re, g.a.im]);
            if !self.pinned {
                v.extend([g.b.re, g.b.im]);
            }
        }
        DVector::from_vec(v)
    }

    fn unpack(&self, x: &DVector<f64>) -> Vec<QuaternionicGreen> {
        let stride = if self.pinned { 2 } else { 4 };
        (0..self.quaternions())
            .map(|k| {
                let o = k * stride;
                let a = Complex64::new(x[o], x[o + 1]);
                let b = if self.pinned {
                    Complex64::default()
                } else {
                    Complex64::new(x[o + 2], x[o + 3])
                };
                QuaternionicGreen::new(a, b)
            })
            .collect()
    }

    fn eval(&self, s: &[QuaternionicGreen]) -> Result<Eval> {
        let zm = Complex2x2::spectral(self.z);
        let (next_m, gm) = match self.law {
            Law::Single(r) => {
                let gm = (zm - r.apply_green(&s[0])).invert()?;
                (vec![gm], gm)
            }
            Law::Product(ra, rb, u) => {
                let (ga, gb) = (s[0], s[s.len() - 1]);
                let sal = u.left(&ra.apply_green(&gb));
                let sbr = u.right(&rb.apply_green(&ga));
                let gm = (zm - sal * sbr).invert()?;
                let ga_new = u.left(&(gm * sal));
                if self.reduced {
                    (vec![ga_new], gm)
                } else {
                    (vec![ga_new, u.right(&(sbr * gm))], gm)
                }
            }
        };
        let mut residual: f64 = 0.0;
        let mut next = Vec::with_capacity(next_m.len());
        for (m, old) in next_m.iter().zip(s) {
            residual = residual.max(QuaternionicGreen::structure_defect(m));
            let mut g = QuaternionicGreen::extract(m);
            if self.pinned {
                residual = residual.max(g.b.norm());
                g.b = Complex64::default();
            }
            residual = residual.max((g.a - old.a).norm()).max((g.b - old.b).norm());
            next.push(g);
        }
        if !residual.is_finite() {
            return Err(Error::Singular { det: f64::NAN });
        }
        Ok(Eval { next, gm, residual })
    }

    fn map_vec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let e = self.eval(&self.unpack(x))?;
        Ok(self.pack(&e.next) - x)
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-7 * x[k].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (self.map_vec(&xp)? - self.map_vec(&xm)?) / (2.0 * h);
            j.set_column(k, &col);
        }
        Ok(j)
    }
}

fn b_max(s: &[QuaternionicGreen]) -> f64 {
    s.iter().map(|g| g.b.norm()).fold(0.0, f64::max)
}

fn damp(s: &[QuaternionicGreen], next: &[QuaternionicGreen]) -> Vec<QuaternionicGreen> {
    s.iter()
        .zip(next)
        .map(|(o, n)| QuaternionicGreen::new(o.a * (1.0 - DAMPING) + n.a * DAMPING, o.b * (1.0 - DAMPING) + n.b * DAMPING))
        .collect()
}

/// Minimum-norm least-squares solve; the phase of `b` is a zero mode.
fn min_norm_solve(j: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = j.svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    svd.solve(rhs, 1e-10 * smax).ok()
}

/// Newton on `F(x) - x`. With `deflate`, the trivial root `b = 0` is
/// deflated by `M(x) = 1/‖b‖² + 1`, which keeps iterates from sliding onto
/// the holomorphic branch near the support boundary.
fn newton(
    sys: &System,
    s: &[QuaternionicGreen],
    deflate: bool,
    target: f64,
    max_iterations: usize,
) -> Option<(Vec<QuaternionicGreen>, f64)> {
    let mut x = sys.pack(s);
    let b_indices: Vec<usize> = if sys.pinned {
        Vec::new()
    } else {
        (0..sys.quaternions()).flat_map(|k| [4 * k + 2, 4 * k + 3]).collect()
    };
    let b_norm2 = |x: &DVector<f64>| b_indices.iter().map(|&i| x[i] * x[i]).sum::<f64>();
    let merit = |x: &DVector<f64>, r: &DVector<f64>| {
        if deflate {
            (1.0 / b_norm2(x) + 1.0) * r.norm()
        } else {
            r.norm()
        }
    };
    for _ in 0..max_iterations {
        let e = sys.eval(&sys.unpack(&x)).ok()?;
        if e.residual <= target {
            return Some((sys.unpack(&x), e.residual));
        }
        let r = sys.pack(&e.next) - &x;
        let j = sys.jacobian(&x).ok()?;
        let mut step = min_norm_solve(j, &(-&r))?;
        if deflate {
            let bn2 = b_norm2(&x);
            let bdot: f64 = b_indices.iter().map(|&i| x[i] * step[i]).sum();
            let denom = 1.0 + 2.0 * bdot / (bn2 * (1.0 + bn2));
            if denom.abs() < 1e-12 {
                return None;
            }
            step /= denom;
        }
        let current = merit(&x, &r);
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..12 {
            let trial = &x + &step * t;
            if let Ok(rt) = sys.map_vec(&trial) {
                let m = merit(&trial, &rt);
                if m.is_finite() && m < current {
                    x = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let e = sys.eval(&sys.unpack(&x)).ok()?;
    (e.residual <= target).then(|| (sys.unpack(&x), e.residual))
}

fn polish(sys: &System, s: Vec<QuaternionicGreen>, residual: f64) -> (Vec<QuaternionicGreen>, f64) {
    if residual <= POLISH_RESIDUAL {
        return (s, residual);
    }
    newton(sys, &s, false, POLISH_RESIDUAL, 20).unwrap_or((s, residual))
}

enum Attempt {
    Found(Vec<QuaternionicGreen>),
    Collapsed,
    Failed(f64),
}

fn nonholomorphic(sys: &System, seed: Vec<QuaternionicGreen>) -> Attempt {
    let accept = |s: Vec<QuaternionicGreen>, r: f64| {
        let (s, r) = polish(sys, s, r);
        if r <= SUCCESS_RESIDUAL && b_max(&s) >= COLLAPSE {
            Some(Attempt::Found(s))
        } else {
            None
        }
    };
    let mut s = seed;
    let mut residual = f64::INFINITY;
    let mut newton_tried = false;
    for it in 0..MAX_ITERATIONS {
        let e = match sys.eval(&s) {
            Ok(e) => e,
            Err(_) => return Attempt::Failed(f64::INFINITY),
        };
        residual = e.residual;
        if b_max(&s) < COLLAPSE {
            return Attempt::Collapsed;
        }
        if residual <= 1e-11 {
            if let Some(found) = accept(s.clone(), residual) {
                return found;
            }
        }
        if !newton_tried && (it >= WARMUP_ITERATIONS || residual < 1e-4) {
            newton_tried = true;
            let deflated = newton(sys, &s, true, 1e-10, NEWTON_ITERATIONS);
            if let Some((sn, rn)) = deflated.or_else(|| newton(sys, &s, false, 1e-10, NEWTON_ITERATIONS)) {
                if let Some(found) = accept(sn, rn) {
                    return found;
                }
            }
        }
        s = damp(&s, &e.next);
    }
    Attempt::Failed(residual)
}

/// Radial continuation from `T·z` down to `z` with `b = 0` pinned.
fn holomorphic(sys: &System, seed: Option<Vec<QuaternionicGreen>>, scale: f64) -> Result<(Vec<QuaternionicGreen>, f64)> {
    let pinned = System { pinned: true, ..*sys };
    let z = sys.z;
    if let Some(seed) = seed {
        if let Some(found) = newton(&pinned, &seed, false, POLISH_RESIDUAL, 20) {
            return Ok(found);
        }
    }
    let mut factors = Vec::new();
    let mut t = (10.0 * scale / z.norm()).max(10.0);
    while t > 1.0 {
        factors.push(t);
        t *= 0.5;
    }
    factors.push(1.0);
    let z0 = z * factors[0];
    let mut s: Vec<QuaternionicGreen> = match sys.law {
        Law::Single(_) => vec![QuaternionicGreen::holomorphic(z0.inv())],
        Law::Product(ra, rb, _) => {
            let ga = QuaternionicGreen::holomorphic(ra.kappa1() / z0);
            let gb = QuaternionicGreen::holomorphic(rb.kappa1() / z0);
            if sys.reduced { vec![ga] } else { vec![ga, gb] }
        }
    };
    let mut residual = f64::INFINITY;
    for &f in &factors {
        let stage = pinned.at(z * f);
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let e = stage.eval(&s)?;
            residual = e.residual;
            if residual <= 1e-6 {
                converged = true;
                break;
            }
            s = damp(&s, &e.next);
        }
        if let Some((sn, rn)) = newton(&stage, &s, false, POLISH_RESIDUAL, 30) {
            s = sn;
            residual = rn;
        } else if !converged {
            return Err(Error::NonConvergence {
                what: "holomorphic branch",
                iterations: MAX_ITERATIONS,
                residual,
            });
        }
    }
    if residual > SUCCESS_RESIDUAL {
        return Err(Error::NonConvergence {
            what: "holomorphic branch",
            iterations: MAX_ITERATIONS,
            residual,
        });
    }
    Ok((s, residual))
}

fn finish(sys: &System, s: &[QuaternionicGreen], branch: Branch) -> Result<NonHermSolution> {
    let e = sys.eval(s)?;
    let gm = QuaternionicGreen::extract(&e.gm);
    let (ga, gb, correlator) = match sys.law {
        Law::Single(_) => (s[0], s[0], s[0].correlator()),
        Law::Product(..) => {
            let (ga, gb) = (s[0], s[s.len() - 1]);
            (ga, gb, ga.b.norm() * gb.b.norm())
        }
    };
    let correlator = if branch == Branch::Holomorphic { 0.0 } else { correlator };
    Ok(NonHermSolution {
        z: sys.z,
        gm,
        ga,
        gb,
        correlator,
        branch,
        residual: e.residual,
    })
}

fn default_seed(sys: &System) -> Vec<QuaternionicGreen> {
    let b = Complex64::new(SEED_B, 0.0);
    match sys.law {
        Law::Single(_) => vec![QuaternionicGreen::new(Complex64::default(), b)],
        Law::Product(ra, rb, _) => {
            let ga = QuaternionicGreen::new(ra.kappa1() / sys.z, b);
            let gb = QuaternionicGreen::new(rb.kappa1() / sys.z, b);
            if sys.reduced { vec![ga] } else { vec![ga, gb] }
        }
    }
}

fn solve_system(sys: &System, options: &SolverOptions, scale: f64) -> Result<NonHermSolution> {
    let seed = options.seed.map(|(ga, gb)| match sys.law {
        Law::Product(..) if !sys.reduced => vec![ga, gb],
        _ => vec![ga],
    });
    let seed_is_holomorphic = seed.as_ref().is_some_and(|s| b_max(s) < COLLAPSE);

    if options.force != Some(Branch::Holomorphic) && !(seed_is_holomorphic && options.force.is_none()) {
        let start = match &seed {
            Some(s) if !seed_is_holomorphic => s.clone(),
            _ => default_seed(sys),
        };
        match nonholomorphic(sys, start) {
            Attempt::Found(s) => {
                let sol = finish(sys, &s, Branch::Nonholomorphic)?;
                if sol.correlator > COLLAPSE || options.force == Some(Branch::Nonholomorphic) {
                    return Ok(sol);
                }
            }
            attempt @ (Attempt::Collapsed | Attempt::Failed(_)) if options.force == Some(Branch::Nonholomorphic) => {
                let residual = match attempt {
                    Attempt::Failed(r) => r,
                    _ => 0.0,
                };
                return Err(Error::NonConvergence {
                    what: "nonholomorphic branch (collapsed or stalled)",
                    iterations: MAX_ITERATIONS,
                    residual,
                });
            }
            Attempt::Collapsed | Attempt::Failed(_) => {}
        }
    }
    let holo_seed = seed.filter(|_| seed_is_holomorphic);
    let (s, _) = holomorphic(sys, holo_seed, scale)?;
    finish(sys, &s, Branch::Holomorphic)
}

pub fn solve_single(rmap: &MatrixRMap, z: Complex64) -> Result<NonHermSolution> {
    solve_single_with(rmap, z, &SolverOptions::default())
}

/// Solves `G = (Z - R(G))⁻¹` with `Z = diag(z, z̄)`.
pub fn solve_single_with(rmap: &MatrixRMap, z: Complex64, options: &SolverOptions) -> Result<NonHermSolution> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite z = {z}")));
    }
    let sys = System {
        law: Law::Single(rmap),
        z,
        pinned: false,
        reduced: false,
    };
    solve_system(&sys, options, rmap.spectral_radius_bound() + 1.0)
}

pub fn solve_product(ra: &MatrixRMap, rb: &MatrixRMap, z: Complex64) -> Result<NonHermSolution> {
    solve_product_with(ra, rb, z, &SolverOptions::default())
}

/// Solves the product law for `M = AB`:
/// `R_M = [R_A(G_B)]^L [R_B(G_A)]^R`, `G_M = (Z - R_M)⁻¹`,
/// `G_A = [G_M [R_A(G_B)]^L]^L`, `G_B = [[R_B(G_A)]^R G_M]^R`.
pub fn solve_product_with(
    ra: &MatrixRMap,
    rb: &MatrixRMap,
    z: Complex64,
    options: &SolverOptions,
) -> Result<NonHermSolution> {
    let phase = phase_split(z)?;
    let full = System {
        law: Law::Product(ra, rb, phase.rotation()),
        z,
        pinned: false,
        reduced: false,
    };
    let scale = (ra.spectral_radius_bound() + 1.0) * (rb.spectral_radius_bound() + 1.0);
    if options.reduce_same && ra.same_law(rb) {
        let reduced = System { reduced: true, ..full };
        let mut reduced_options = *options;
        reduced_options.seed = options.seed.map(|(ga, _)| (ga, ga));
        if let Ok(sol) = solve_system(&reduced, &reduced_options, scale) {
            let check = full.eval(&[sol.ga, sol.ga])?;
            if check.residual <= SUCCESS_RESIDUAL {
                return finish(&full, &[sol.ga, sol.ga], sol.branch);
            }
        }
    }
    solve_system(&full, options, scale)
}
