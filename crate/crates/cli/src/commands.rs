//! One function per subcommand. Each writes its output and reports how many
//! of its points failed.

use std::io::Write;

use freeconv::ensembles::analytic_transforms;
use freeconv::hermitian::{density_real, green_from_r, s_from_r};
use freeconv::montecarlo::{
    compare_density, histogram2d, product_eigenvalues, radial_profile, real_axis_slice, unit_area_section,
    ComparisonReport, EigenCloud, Histogram1d, SCHEMA_VERSION,
};
use freeconv::nonhermitian::{
    boundary_curve, density_at, density_field, solve_product, solve_single, Branch, DensityMethod, RegisteredPair,
};
use freeconv::{par, Complex64, Error};
use serde::Serialize;

use crate::config::{Command, Format, Job};
use crate::output::{num, opt, sink, write_csv, write_json};
use crate::CliError;

/// Points attempted and points that failed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub failed: usize,
    pub total: usize,
}

pub fn run(job: &Job) -> Result<Outcome, CliError> {
    match job.command {
        Command::Transform => transform(job),
        Command::SolveProduct => solve(job),
        Command::Boundary => boundary(job),
        Command::Density => density(job),
        Command::Sample => sample(job),
        Command::Compare => compare(job),
    }
}

fn cplx(z: Option<Complex64>) -> [String; 2] {
    match z {
        Some(z) => [num(z.re), num(z.im)],
        None => [String::new(), String::new()],
    }
}

fn emit<R: Serialize>(job: &Job, header: &[&str], rows: &[R], to_csv: impl Fn(&R) -> Vec<String>) -> Result<(), CliError> {
    match job.format {
        Format::Csv => write_csv(job, header, &rows.iter().map(to_csv).collect::<Vec<_>>()),
        Format::Json => write_json(job, &rows),
    }
}

#[derive(Serialize)]
struct TransformRow {
    x: f64,
    y: f64,
    g11: Option<Complex64>,
    g12: Option<Complex64>,
    r11: Option<Complex64>,
    r12: Option<Complex64>,
    density: Option<f64>,
    /// `None` with `s_status = "undefined"` for centered or non-hermitian ensembles.
    s: Option<Complex64>,
    s_status: String,
    status: String,
}

fn transform(job: &Job) -> Result<Outcome, CliError> {
    let spec = &job.ensemble_a;
    let transforms = analytic_transforms(spec)?;
    let on_axis = job.grid.is_none();
    let points: Vec<Complex64> = match (&job.grid, &job.axis) {
        (Some(g), _) => g.points(),
        (None, Some(a)) => a.points().into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        (None, None) => unreachable!("validated"),
    };
    let rows = par::map(&points, |&z| {
        let mut row = TransformRow {
            x: z.re,
            y: z.im,
            g11: None,
            g12: None,
            r11: None,
            r12: None,
            density: None,
            s: None,
            s_status: "undefined".into(),
            status: "ok".into(),
        };
        let mut errors = Vec::new();
        match &transforms.scalar {
            Some(t) => {
                let zeval = if z.im == 0.0 { Complex64::new(z.re, job.epsilon) } else { z };
                match green_from_r(t, zeval) {
                    Ok(h) => {
                        row.g11 = Some(h.g);
                        row.g12 = Some(Complex64::default());
                        row.r11 = Some(t.r(h.g));
                        row.r12 = Some(Complex64::default());
                    }
                    Err(e) => errors.push(format!("G at {zeval}: {e}")),
                }
                if on_axis {
                    match density_real(t, z.re, job.epsilon) {
                        Ok(d) => row.density = Some(d),
                        Err(e) => errors.push(format!("density at {}: {e}", z.re)),
                    }
                }
                match s_from_r(t, z) {
                    Ok(s) => {
                        row.s = Some(s);
                        row.s_status = "ok".into();
                    }
                    Err(Error::CenteredSTransform { .. }) => {}
                    Err(e) => {
                        row.s_status = "failed".into();
                        errors.push(format!("S at y = {z}: {e}"));
                    }
                }
            }
            None => match solve_single(&transforms.matrix, z) {
                Ok(sol) => {
                    row.g11 = Some(sol.gm.a);
                    row.g12 = Some(sol.gm.b);
                    let r = transforms.matrix.apply_green(&sol.gm);
                    row.r11 = Some(r.q11);
                    row.r12 = Some(r.q12);
                }
                Err(e) => errors.push(format!("G at {z}: {e}")),
            },
        }
        if !errors.is_empty() {
            row.status = errors.join("; ");
        }
        row
    });
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    let header = [
        "x", "y", "g11_re", "g11_im", "g12_re", "g12_im", "r11_re", "r11_im", "r12_re", "r12_im", "density", "s_re", "s_im",
        "status",
    ];
    emit(job, &header, &rows, |r| {
        let mut v = vec![num(r.x), num(r.y)];
        for z in [r.g11, r.g12, r.r11, r.r12] {
            v.extend(cplx(z));
        }
        v.push(opt(r.density));
        match r.s {
            Some(s) => v.extend(cplx(Some(s))),
            None => v.extend([r.s_status.clone(), r.s_status.clone()]),
        }
        v.push(r.status.clone());
        v
    })?;
    Ok(Outcome {
        failed,
        total: rows.len(),
    })
}

#[derive(Serialize)]
struct SolveRow {
    x: f64,
    y: f64,
    a: Option<Complex64>,
    b: Option<Complex64>,
    correlator: Option<f64>,
    branch: Option<Branch>,
    residual: Option<f64>,
    rho: Option<f64>,
    rot: Option<f64>,
    status: String,
}

fn solve(job: &Job) -> Result<Outcome, CliError> {
    let grid = job.grid.as_ref().expect("validated");
    let points = grid.points();
    let rows = par::map(&points, |&z| {
        let mut row = SolveRow {
            x: z.re,
            y: z.im,
            a: None,
            b: None,
            correlator: None,
            branch: None,
            residual: None,
            rho: None,
            rot: None,
            status: "ok".into(),
        };
        match solve_product(&job.map_a, &job.map_b, z) {
            Ok(sol) => {
                row.a = Some(sol.gm.a);
                row.b = Some(sol.gm.b);
                row.correlator = Some(sol.correlator);
                row.branch = Some(sol.branch);
                row.residual = Some(sol.residual);
                if let Ok(p) = density_at(&job.map_a, &job.map_b, z, DensityMethod::FiniteDifference, None) {
                    row.rho = Some(p.rho);
                    row.rot = Some(p.rot.abs());
                }
            }
            Err(e) => row.status = format!("failed at {z}: {e}"),
        }
        row
    });
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    let header = ["x", "y", "a_re", "a_im", "b_re", "b_im", "correlator", "branch", "residual", "rho", "rot", "status"];
    emit(job, &header, &rows, |r| {
        let mut v = vec![num(r.x), num(r.y)];
        v.extend(cplx(r.a));
        v.extend(cplx(r.b));
        v.push(opt(r.correlator));
        v.push(match r.branch {
            Some(Branch::Holomorphic) => "holomorphic".into(),
            Some(Branch::Nonholomorphic) => "nonholomorphic".into(),
            None => String::new(),
        });
        v.extend([opt(r.residual), opt(r.rho), opt(r.rot), r.status.clone()]);
        v
    })?;
    Ok(Outcome {
        failed,
        total: rows.len(),
    })
}

#[derive(Serialize)]
struct BoundaryRow {
    phi: f64,
    r: Option<f64>,
    reference: Option<f64>,
    status: &'static str,
}

/// Closed-form outer boundary along `phi` for registered pairs.
fn reference_radius(pair: Option<RegisteredPair>, phi: f64) -> Option<f64> {
    match pair? {
        RegisteredPair::CenteredElliptic { s } => Some(s),
        RegisteredPair::Limacon => {
            let r = 1.0 + 2.0 * phi.cos();
            (r > 0.0).then_some(r)
        }
    }
}

fn boundary(job: &Job) -> Result<Outcome, CliError> {
    let rays = boundary_curve(&job.map_a, &job.map_b, job.angular_samples, job.radial_tolerance)?;
    let pair = RegisteredPair::detect(&job.map_a, &job.map_b);
    let rows: Vec<BoundaryRow> = rays
        .iter()
        .map(|ray| BoundaryRow {
            phi: ray.phi,
            r: ray.r,
            reference: reference_radius(pair, ray.phi),
            status: if ray.r.is_some() { "ok" } else { "unbounded or empty" },
        })
        .collect();
    emit(job, &["phi", "r", "reference", "status"], &rows, |r| {
        vec![num(r.phi), opt(r.r), opt(r.reference), r.status.into()]
    })?;
    // empty rays are a property of the support, not a failure
    Ok(Outcome {
        failed: 0,
        total: rows.len(),
    })
}

fn density(job: &Job) -> Result<Outcome, CliError> {
    let grid = job.grid.as_ref().expect("validated");
    let field = density_field(&job.map_a, &job.map_b, grid, job.method)?;
    match job.format {
        Format::Json => write_json(job, &field)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..field.points.len())
                .map(|k| {
                    let z = field.points[k];
                    let mut v = vec![num(z.re), num(z.im), num(field.rho[k])];
                    v.extend(cplx(Some(field.g11[k])));
                    v.extend([
                        num(field.rot_residual[k]),
                        num(field.correlator[k]),
                        field.inside[k].to_string(),
                    ]);
                    v
                })
                .collect();
            write_csv(
                job,
                &["x", "y", "rho", "g11_re", "g11_im", "rot_residual", "correlator", "inside"],
                &rows,
            )?;
        }
    }
    Ok(Outcome {
        failed: field.holes,
        total: field.points.len(),
    })
}

fn sample_cloud(job: &Job) -> Result<EigenCloud, CliError> {
    Ok(product_eigenvalues(&job.ensemble_a, &job.ensemble_b, job.trials, job.seed)?)
}

#[derive(Serialize)]
struct CloudJson<'a> {
    schema_version: u32,
    specs: &'a [freeconv::ensembles::EnsembleSpec],
    seed: u64,
    n: usize,
    trials: usize,
    skipped: &'a [u64],
    trial_of: &'a [u64],
    eigenvalues: &'a [Complex64],
}

fn sample(job: &Job) -> Result<Outcome, CliError> {
    let cloud = sample_cloud(job)?;
    let mut out = sink(job)?;
    match job.format {
        Format::Csv => cloud.write_csv(&mut out)?,
        Format::Json => {
            serde_json::to_writer(
                &mut out,
                &CloudJson {
                    schema_version: SCHEMA_VERSION,
                    specs: &cloud.specs,
                    seed: cloud.seed,
                    n: cloud.n,
                    trials: cloud.trials,
                    skipped: &cloud.skipped,
                    trial_of: &cloud.trial_of,
                    eigenvalues: &cloud.eigenvalues,
                },
            )?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(Outcome {
        failed: cloud.skipped.len(),
        total: cloud.trials,
    })
}

#[derive(Serialize)]
struct SliceReport {
    empirical: Histogram1d,
    /// Analytic density at the bin centers on the real axis, unit area.
    analytic: Vec<f64>,
    l1_distance: f64,
    normalization: &'static str,
}

#[derive(Serialize)]
struct CompareReport {
    eigenvalues: usize,
    skipped_trials: usize,
    analytic_method: DensityMethod,
    analytic_holes: usize,
    comparison: ComparisonReport,
    radial_profile: Histogram1d,
    #[serde(skip_serializing_if = "Option::is_none")]
    slice: Option<SliceReport>,
}

fn compare(job: &Job) -> Result<Outcome, CliError> {
    let grid = job.grid.as_ref().expect("resolved");
    let cloud = sample_cloud(job)?;
    let analytic = density_field(&job.map_a, &job.map_b, grid, job.method.filter(|m| *m != DensityMethod::Empirical))?;
    let empirical = histogram2d(&cloud, grid)?;
    let comparison = compare_density(&empirical, &analytic, job.exclusions)?;
    let reach = job.map_a.spectral_radius_bound() * job.map_b.spectral_radius_bound();
    let radial = radial_profile(&cloud, job.radial_bins, (0.0, reach))?;
    let slice = match job.slice {
        None => None,
        Some(s) => {
            let hist = real_axis_slice(&cloud, s.eps, s.bins, (s.min, s.max))?;
            let method = analytic.method;
            let raw = hist
                .centers
                .iter()
                .map(|&x| density_at(&job.map_a, &job.map_b, Complex64::new(x, 0.0), method, None).map(|p| p.rho))
                .collect::<Result<Vec<f64>, Error>>()?;
            let section = unit_area_section(&raw, hist.width());
            let l1 = hist.density.iter().zip(&section).map(|(p, q)| (p - q).abs()).sum::<f64>() * hist.width();
            Some(SliceReport {
                empirical: hist,
                analytic: section,
                l1_distance: l1,
                normalization: "empirical slab and analytic section each scaled to unit area over the interval",
            })
        }
    };
    let report = CompareReport {
        eigenvalues: cloud.len(),
        skipped_trials: cloud.skipped.len(),
        analytic_method: analytic.method,
        analytic_holes: analytic.holes,
        comparison,
        radial_profile: radial,
        slice,
    };
    match job.format {
        Format::Json => write_json(job, &report)?,
        Format::Csv => {
            let areas = grid.areas();
            let c = &report.comparison;
            let rows: Vec<Vec<String>> = (0..grid.len())
                .map(|k| {
                    vec![
                        num(analytic.points[k].re),
                        num(analytic.points[k].im),
                        num(areas[k]),
                        num(empirical.rho[k]),
                        num(analytic.rho[k]),
                        c.sample_counts.as_ref().map(|v| v[k].to_string()).unwrap_or_default(),
                        opt(c.expected_counts.as_ref().map(|v| v[k])),
                        c.included[k].to_string(),
                    ]
                })
                .collect();
            write_csv(
                job,
                &["x", "y", "area", "empirical", "analytic", "count", "expected", "included"],
                &rows,
            )?;
        }
    }
    Ok(Outcome {
        failed: cloud.skipped.len(),
        total: cloud.trials,
    })
}
