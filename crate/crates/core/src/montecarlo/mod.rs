//! Eigenvalue clouds of sampled products and their statistical comparison
//! with analytic densities.

mod stats;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sample_role, EnsembleSpec, Role};
use crate::error::{Error, Result};
use crate::par;

pub use stats::{
    compare_density, histogram2d, radial_profile, real_axis_slice, unit_area_section, ComparisonReport, Exclusions,
    Histogram1d,
};

/// Largest share of trials the eigensolver may skip.
pub const SKIP_LIMIT: f64 = 0.01;
pub const SCHEMA_VERSION: u32 = 1;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITERATIONS: usize = 10_000;

/// Eigenvalues of many sampled matrices, with the keys that reproduce them.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenCloud {
    pub eigenvalues: Vec<Complex64>,
    /// Trial index of each eigenvalue.
    pub trial_of: Vec<u64>,
    pub n: usize,
    /// Trials requested.
    pub trials: usize,
    /// Trials dropped after two eigensolver failures.
    pub skipped: Vec<u64>,
    /// One spec for a single ensemble, two for a product `A·B`.
    pub specs: Vec<EnsembleSpec>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CloudHeader {
    schema_version: u32,
    specs: Vec<EnsembleSpec>,
    seed: u64,
    n: usize,
    trials: usize,
    skipped: Vec<u64>,
}

const PROVENANCE_PREFIX: &str = "# provenance: ";

impl EigenCloud {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn completed_trials(&self) -> usize {
        self.trials - self.skipped.len()
    }

    pub fn provenance_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&CloudHeader {
            schema_version: SCHEMA_VERSION,
            specs: self.specs.clone(),
            seed: self.seed,
            n: self.n,
            trials: self.trials,
            skipped: self.skipped.clone(),
        })?)
    }

    /// CSV with columns `trial, re, im`, preceded by a provenance comment.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{PROVENANCE_PREFIX}{}", self.provenance_json()?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "re", "im"]).map_err(csv_error)?;
        for (t, z) in self.trial_of.iter().zip(&self.eigenvalues) {
            w.write_record([t.to_string(), format!("{:.16e}", z.re), format!("{:.16e}", z.im)])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let json = first
            .trim_end()
            .strip_prefix(PROVENANCE_PREFIX)
            .ok_or_else(|| Error::InvalidArgument("eigenvalue CSV lacks a provenance line".into()))?;
        let header: CloudHeader = serde_json::from_str(json)?;
        let mut reader = csv::Reader::from_reader(input);
        let mut eigenvalues = Vec::new();
        let mut trial_of = Vec::new();
        for record in reader.records() {
            let record = record.map_err(csv_error)?;
            let field = |i: usize| -> Result<&str> {
                record
                    .get(i)
                    .ok_or_else(|| Error::InvalidArgument(format!("short CSV row: {record:?}")))
            };
            let parse = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| Error::InvalidArgument(format!("bad number {s:?}")))
            };
            trial_of.push(
                field(0)?
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad trial index in {record:?}")))?,
            );
            eigenvalues.push(Complex64::new(parse(field(1)?)?, parse(field(2)?)?));
        }
        Ok(EigenCloud {
            eigenvalues,
            trial_of,
            n: header.n,
            trials: header.trials,
            skipped: header.skipped,
            specs: header.specs,
            seed: header.seed,
        })
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// All eigenvalues of a dense complex matrix from its Schur form, or
/// `None` when the QR iteration stalls or the result fails the trace checks.
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Option<Vec<Complex64>> {
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITERATIONS)?;
    let values: Vec<Complex64> = schur.eigenvalues()?.iter().copied().collect();
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return None;
    }
    // Σλ = tr M and Σλ² = tr M²
    let scale = m.norm() * m.nrows() as f64;
    let t1 = m.trace();
    let t2 = (m * m).trace();
    let s1: Complex64 = values.iter().sum();
    let s2: Complex64 = values.iter().map(|v| v * v).sum();
    let tol = 1e-9 * (1.0 + scale);
    ((s1 - t1).norm() <= tol && (s2 - t2).norm() <= tol * (1.0 + scale)).then_some(values)
}

fn check_specs(specs: &[&EnsembleSpec], trials: usize) -> Result<()> {
    let mut problems: Vec<String> = specs
        .iter()
        .zip(["A", "B"])
        .flat_map(|(s, name)| s.problems().into_iter().map(move |p| format!("spec {name}: {p}")))
        .collect();
    if specs.len() == 2 && specs[0].n != specs[1].n {
        problems.push(format!("dimensions differ: {} vs {}", specs[0].n, specs[1].n));
    }
    if trials == 0 {
        problems.push("trials must be at least 1".into());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(problems))
    }
}

fn build_cloud(specs: Vec<EnsembleSpec>, trials: usize, seed: u64, per_trial: Vec<Option<Vec<Complex64>>>) -> Result<EigenCloud> {
    let n = specs[0].n;
    let mut cloud = EigenCloud {
        eigenvalues: Vec::with_capacity(n * trials),
        trial_of: Vec::with_capacity(n * trials),
        n,
        trials,
        skipped: Vec::new(),
        specs,
        seed,
    };
    for (t, values) in per_trial.into_iter().enumerate() {
        match values {
            Some(v) => {
                cloud.trial_of.extend(std::iter::repeat_n(t as u64, v.len()));
                cloud.eigenvalues.extend(v);
            }
            None => cloud.skipped.push(t as u64),
        }
    }
    if cloud.skipped.len() as f64 > SKIP_LIMIT * trials as f64 {
        return Err(Error::SkipRate {
            skipped: cloud.skipped.len(),
            trials,
        });
    }
    Ok(cloud)
}

/// Eigenvalues of `M = A·B` over `trials` independent draws. A failed
/// decomposition is retried once with fresh draws (attempt 1), then skipped.
pub fn product_eigenvalues(a: &EnsembleSpec, b: &EnsembleSpec, trials: usize, seed: u64) -> Result<EigenCloud> {
    check_specs(&[a, b], trials)?;
    let per_trial = par::map_range(trials, |t| {
        (0..2).find_map(|attempt| {
            let ma = sample_role(a, seed, t as u64, Role::A, attempt).ok()?;
            let mb = sample_role(b, seed, t as u64, Role::B, attempt).ok()?;
            eigenvalues(&(ma.entries * mb.entries))
        })
    });
    build_cloud(vec![a.clone(), b.clone()], trials, seed, per_trial)
}

/// Eigenvalues of single-ensemble draws.
pub fn single_eigenvalues(spec: &EnsembleSpec, trials: usize, seed: u64) -> Result<EigenCloud> {
    check_specs(&[spec], trials)?;
    let per_trial = par::map_range(trials, |t| {
        (0..2).find_map(|attempt| eigenvalues(&sample_role(spec, seed, t as u64, Role::A, attempt).ok()?.entries))
    });
    build_cloud(vec![spec.clone()], trials, seed, per_trial)
}

/// Mean over trials of `(1/n) Tr Mᵏ` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub k: usize,
    pub mean: Complex64,
    /// Standard errors of the real and imaginary parts.
    pub std_err: (f64, f64),
}

impl MomentEstimate {
    /// Distance from `target` in standard errors, worst of the two parts.
    pub fn z_score(&self, target: Complex64) -> f64 {
        let d = self.mean - target;
        let part = |x: f64, se: f64| if se > 0.0 { x.abs() / se } else if x == 0.0 { 0.0 } else { f64::INFINITY };
        part(d.re, self.std_err.0).max(part(d.im, self.std_err.1))
    }
}

/// Normalized trace moments `k = 1..=k_max` of `M = A·B`.
pub fn trace_moments(a: &EnsembleSpec, b: &EnsembleSpec, trials: usize, seed: u64, k_max: usize) -> Result<Vec<MomentEstimate>> {
    check_specs(&[a, b], trials)?;
    if trials < 2 {
        return Err(Error::InvalidSpec(vec!["moment errors need at least 2 trials".into()]));
    }
    let per_trial: Vec<Vec<Complex64>> = par::map_range(trials, |t| {
        let ma = sample_role(a, seed, t as u64, Role::A, 0).expect("validated spec");
        let mb = sample_role(b, seed, t as u64, Role::B, 0).expect("validated spec");
        let m = ma.entries * mb.entries;
        let n = m.nrows() as f64;
        let mut power = m.clone();
        let mut out = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            if k > 1 {
                power = &power * &m;
            }
            out.push(power.trace() / n);
        }
        out
    });
    let count = trials as f64;
    Ok((0..k_max)
        .map(|i| {
            let mean: Complex64 = per_trial.iter().map(|v| v[i]).sum::<Complex64>() / count;
            let var = |f: fn(Complex64) -> f64| {
                per_trial.iter().map(|v| (f(v[i]) - f(mean)).powi(2)).sum::<f64>() / (count - 1.0)
            };
            MomentEstimate {
                k: i + 1,
                mean,
                std_err: ((var(|c| c.re) / count).sqrt(), (var(|c| c.im) / count).sqrt()),
            }
        })
        .collect())
}
