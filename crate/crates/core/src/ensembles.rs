//! Finite-n samplers for Ginibre, elliptic, GUE and shifted ensembles,
//! normalized so that entries have variance `σ²/n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::ScalarTransform;
use crate::nonhermitian::{elliptic_rmap, shifted_rmap, MatrixRMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Ginibre,
    Elliptic,
    Gue,
    Shifted,
}

/// Ensemble description; together with a seed it is the reproducibility key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub sigma: f64,
    /// Used by elliptic and shifted; implied by ginibre (0) and gue (1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub shift: Complex64,
    pub n: usize,
}

fn is_zero(c: &Complex64) -> bool {
    c.re == 0.0 && c.im == 0.0
}

impl EnsembleSpec {
    pub fn ginibre(sigma: f64, n: usize) -> Self {
        Self { kind: EnsembleKind::Ginibre, sigma, tau: None, shift: Complex64::default(), n }
    }

    pub fn elliptic(sigma: f64, tau: f64, n: usize) -> Self {
        Self { kind: EnsembleKind::Elliptic, sigma, tau: Some(tau), shift: Complex64::default(), n }
    }

    pub fn gue(sigma: f64, n: usize) -> Self {
        Self { kind: EnsembleKind::Gue, sigma, tau: None, shift: Complex64::default(), n }
    }

    /// Elliptic base plus `shift·1`.
    pub fn shifted(sigma: f64, tau: f64, shift: Complex64, n: usize) -> Self {
        Self { kind: EnsembleKind::Shifted, sigma, tau: Some(tau), shift, n }
    }

    pub fn effective_tau(&self) -> f64 {
        match self.kind {
            EnsembleKind::Ginibre => 0.0,
            EnsembleKind::Gue => 1.0,
            EnsembleKind::Elliptic | EnsembleKind::Shifted => self.tau.unwrap_or(0.0),
        }
    }

    /// Every violated constraint, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            out.push(format!("sigma must be positive and finite, got {}", self.sigma));
        }
        if self.n < 2 {
            out.push(format!("n must be at least 2, got {}", self.n));
        }
        if let Some(tau) = self.tau {
            if !(tau.abs() <= 1.0) {
                out.push(format!("tau must lie in [-1, 1], got {tau}"));
            }
            match self.kind {
                EnsembleKind::Ginibre if tau != 0.0 => out.push(format!("ginibre requires tau = 0, got {tau}")),
                EnsembleKind::Gue if tau != 1.0 => out.push(format!("gue requires tau = 1, got {tau}")),
                _ => {}
            }
        }
        if !(self.shift.re.is_finite() && self.shift.im.is_finite()) {
            out.push("shift must be finite".into());
        }
        if self.kind != EnsembleKind::Shifted && !is_zero(&self.shift) {
            out.push(format!("shift is only allowed for kind shifted, got {}", self.shift));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems))
        }
    }
}

/// Which factor of a product a sample feeds; keys independent streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: EnsembleSpec,
    pub seed: u64,
    pub trial: u64,
    pub role: Role,
    /// Re-draw counter, non-zero only after an eigensolver failure.
    pub attempt: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledMatrix {
    pub n: usize,
    pub entries: DMatrix<Complex64>,
    pub provenance: Provenance,
}

/// ChaCha20 keyed by `(seed, role, attempt)` with the trial as stream id:
/// each trial is an independent counter-based stream.
fn stream(seed: u64, role: Role, attempt: u32, trial: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = match role {
        Role::A => 1,
        Role::B => 2,
    };
    key[12..16].copy_from_slice(&attempt.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

fn normal(rng: &mut ChaCha20Rng, std: f64) -> f64 {
    let x: f64 = rng.sample(StandardNormal);
    x * std
}

/// Hermitian Gaussian with `E|H_ij|² = σ²/n` off the diagonal and real
/// `N(0, σ²/n)` diagonal.
fn hermitian_gaussian(rng: &mut ChaCha20Rng, n: usize, sigma: f64) -> DMatrix<Complex64> {
    let off = sigma / (2.0 * n as f64).sqrt();
    let diag = sigma / (n as f64).sqrt();
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = Complex64::new(normal(rng, diag), 0.0);
        for j in i + 1..n {
            let v = Complex64::new(normal(rng, off), normal(rng, off));
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

pub fn sample(spec: &EnsembleSpec, seed: u64, trial: u64) -> Result<SampledMatrix> {
    sample_role(spec, seed, trial, Role::A, 0)
}

/// Draws one matrix. The output depends only on the arguments, never on
/// call order or thread.
pub fn sample_role(spec: &EnsembleSpec, seed: u64, trial: u64, role: Role, attempt: u32) -> Result<SampledMatrix> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = stream(seed, role, attempt, trial);
    let mut entries = match spec.kind {
        EnsembleKind::Ginibre => {
            let std = spec.sigma / (2.0 * n as f64).sqrt();
            DMatrix::from_fn(n, n, |_, _| Complex64::new(normal(&mut rng, std), normal(&mut rng, std)))
        }
        EnsembleKind::Gue => hermitian_gaussian(&mut rng, n, spec.sigma),
        EnsembleKind::Elliptic | EnsembleKind::Shifted => {
            let tau = spec.effective_tau();
            let (p, q) = (((1.0 + tau) / 2.0).sqrt(), ((1.0 - tau) / 2.0).sqrt());
            let mut x = DMatrix::zeros(n, n);
            if p > 0.0 {
                x += hermitian_gaussian(&mut rng, n, spec.sigma) * Complex64::new(p, 0.0);
            }
            if q > 0.0 {
                x += hermitian_gaussian(&mut rng, n, spec.sigma) * Complex64::new(0.0, q);
            }
            x
        }
    };
    if !is_zero(&spec.shift) {
        for i in 0..n {
            entries[(i, i)] += spec.shift;
        }
    }
    Ok(SampledMatrix {
        n,
        entries,
        provenance: Provenance { spec: spec.clone(), seed, trial, role, attempt },
    })
}

/// Closed-form transforms matching a spec.
#[derive(Clone, Debug)]
pub struct AnalyticTransforms {
    /// Present only for hermitian specs (`τ = 1`, real shift).
    pub scalar: Option<ScalarTransform>,
    pub matrix: MatrixRMap,
}

pub fn analytic_transforms(spec: &EnsembleSpec) -> Result<AnalyticTransforms> {
    spec.validate()?;
    let tau = spec.effective_tau();
    let base = elliptic_rmap(spec.sigma, tau)?;
    let matrix = shifted_rmap(&base, spec.shift);
    let scalar = (tau == 1.0 && spec.shift.im == 0.0)
        .then(|| ScalarTransform::shifted_gaussian(spec.shift, spec.sigma));
    Ok(AnalyticTransforms { scalar, matrix })
}
