//! Histograms of eigenvalue clouds and empirical-versus-analytic comparison.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::EigenCloud;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::nonhermitian::{DensityField, DensityMethod};

/// One-dimensional histogram on `bins` equal cells of `[lo, hi)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram1d {
    pub lo: f64,
    pub hi: f64,
    pub centers: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Eigenvalues that passed any filter, inside or outside `[lo, hi)`.
    pub passed: u64,
    /// Eigenvalues in the cloud.
    pub total: u64,
    pub normalization: String,
    /// True when no eigenvalue passed the filter; `density` is then all zero.
    pub empty: bool,
}

impl Histogram1d {
    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.centers.len() as f64
    }

    /// `Σ |p − f(center)|·width`.
    pub fn l1_against(&self, f: impl Fn(f64) -> f64) -> f64 {
        let w = self.width();
        self.centers.iter().zip(&self.density).map(|(&x, &p)| (p - f(x)).abs() * w).sum()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.width()
    }
}

fn bin_values(values: impl Iterator<Item = f64>, lo: f64, hi: f64, bins: usize) -> (Vec<u64>, u64) {
    let mut counts = vec![0u64; bins];
    let mut passed = 0;
    let w = (hi - lo) / bins as f64;
    for v in values {
        passed += 1;
        let f = ((v - lo) / w).floor();
        if f >= 0.0 && f < bins as f64 {
            counts[f as usize] += 1;
        }
    }
    (counts, passed)
}

fn check_range(bins: usize, min_bins: usize, range: (f64, f64)) -> Result<()> {
    let mut problems = Vec::new();
    if bins < min_bins {
        problems.push(format!("bins must be at least {min_bins}, got {bins}"));
    }
    if !(range.0 < range.1 && range.0.is_finite() && range.1.is_finite()) {
        problems.push(format!("invalid range [{}, {}]", range.0, range.1));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(problems))
    }
}

fn centers(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..bins).map(|i| lo + (i as f64 + 0.5) * w).collect()
}

/// Probability density of `|λ|`: counts / (all eigenvalues · bin width).
pub fn radial_profile(cloud: &EigenCloud, bins: usize, range: (f64, f64)) -> Result<Histogram1d> {
    check_range(bins, 4, range)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (lo, hi) = range;
    let (counts, passed) = bin_values(cloud.eigenvalues.iter().map(|z| z.norm()), lo, hi, bins);
    let norm = passed as f64 * (hi - lo) / bins as f64;
    Ok(Histogram1d {
        lo,
        hi,
        centers: centers(lo, hi, bins),
        density: counts.iter().map(|&c| c as f64 / norm).collect(),
        counts,
        passed,
        total: cloud.len() as u64,
        normalization: "probability density in r over all eigenvalues".into(),
        empty: false,
    })
}

/// Histogram of `Re λ` for `|Im λ| < eps`, normalized to unit area over
/// `range`. Compare with [`unit_area_section`] of the analytic density.
pub fn real_axis_slice(cloud: &EigenCloud, eps: f64, bins: usize, range: (f64, f64)) -> Result<Histogram1d> {
    check_range(bins, 1, range)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(vec![format!("eps must be positive, got {eps}")]));
    }
    let (lo, hi) = range;
    let near_real = cloud.eigenvalues.iter().filter(|z| z.im.abs() < eps).map(|z| z.re);
    let (counts, passed) = bin_values(near_real, lo, hi, bins);
    let in_range: u64 = counts.iter().sum();
    let w = (hi - lo) / bins as f64;
    let density = if in_range == 0 {
        vec![0.0; bins]
    } else {
        counts.iter().map(|&c| c as f64 / (in_range as f64 * w)).collect()
    };
    Ok(Histogram1d {
        lo,
        hi,
        centers: centers(lo, hi, bins),
        density,
        counts,
        passed,
        total: cloud.len() as u64,
        normalization: format!("unit area over [{lo}, {hi}] for |Im λ| < {eps}"),
        empty: in_range == 0,
    })
}

/// Rescales samples of a density on a uniform mesh to unit midpoint-rule area.
pub fn unit_area_section(values: &[f64], width: f64) -> Vec<f64> {
    let area: f64 = values.iter().sum::<f64>() * width;
    values.iter().map(|v| v / area).collect()
}

/// Empirical density on `grid`: counts / (eigenvalues · cell area).
pub fn histogram2d(cloud: &EigenCloud, grid: &Grid) -> Result<DensityField> {
    grid.validate(1)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut counts = vec![0u64; grid.len()];
    for z in &cloud.eigenvalues {
        if let Some(k) = grid.locate(*z) {
            counts[k] += 1;
        }
    }
    let total = cloud.len() as u64;
    let areas = grid.areas();
    let rho: Vec<f64> = counts.iter().zip(&areas).map(|(&c, a)| c as f64 / (total as f64 * a)).collect();
    let n = grid.len();
    let nan = Complex64::new(f64::NAN, f64::NAN);
    Ok(DensityField {
        grid: grid.clone(),
        method: DensityMethod::Empirical,
        points: grid.points(),
        g11: vec![nan; n],
        inside: counts.iter().map(|&c| c > 0).collect(),
        rho,
        rot_residual: vec![f64::NAN; n],
        correlator: vec![f64::NAN; n],
        holes: 0,
        counts: Some(counts),
        total: Some(total),
    })
}

/// Cells left out of a statistical comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exclusions {
    /// Cells whose center lies within this radius of the origin.
    pub core_radius: f64,
    /// Cells within this many steps of the analytic support boundary.
    pub collar_cells: usize,
    /// Cells expecting fewer eigenvalues than this.
    pub min_expected: f64,
}

impl Default for Exclusions {
    fn default() -> Self {
        Exclusions {
            core_radius: 0.1,
            collar_cells: 2,
            min_expected: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `Σ |ρ_emp − ρ_an|·area` over included cells.
    pub l1_distance: f64,
    pub max_deviation: f64,
    pub region: String,
    pub exclusions: Exclusions,
    pub included_cells: usize,
    pub total_cells: usize,
    /// Analytic probability mass of the included cells.
    pub included_mass: f64,
    /// Observed and expected eigenvalue counts per cell; `None` for analytic inputs.
    pub sample_counts: Option<Vec<u64>>,
    pub expected_counts: Option<Vec<f64>>,
    pub included: Vec<bool>,
}

/// Compares two fields on the same grid. For empirical input the expected
/// counts use its eigenvalue total; otherwise the count cut is skipped.
pub fn compare_density(empirical: &DensityField, analytic: &DensityField, exclusions: Exclusions) -> Result<ComparisonReport> {
    if empirical.grid != analytic.grid {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            empirical.grid, analytic.grid
        )));
    }
    let grid = &analytic.grid;
    let areas = grid.areas();
    let collar = grid.collar(&analytic.inside, exclusions.collar_cells);
    let expected: Option<Vec<f64>> = empirical
        .total
        .map(|t| analytic.rho.iter().zip(&areas).map(|(r, a)| r * a * t as f64).collect());
    let included: Vec<bool> = (0..grid.len())
        .map(|k| {
            let usable = empirical.rho[k].is_finite() && analytic.rho[k].is_finite();
            let outside_core = analytic.points[k].norm() >= exclusions.core_radius;
            let enough = expected.as_ref().is_none_or(|e| e[k] >= exclusions.min_expected);
            usable && outside_core && !collar[k] && enough
        })
        .collect();
    let mut l1 = 0.0;
    let mut max_dev: f64 = 0.0;
    let mut mass = 0.0;
    for k in (0..grid.len()).filter(|&k| included[k]) {
        let d = (empirical.rho[k] - analytic.rho[k]).abs();
        l1 += d * areas[k];
        max_dev = max_dev.max(d);
        mass += analytic.rho[k] * areas[k];
    }
    let count = included.iter().filter(|&&b| b).count();
    Ok(ComparisonReport {
        l1_distance: l1,
        max_deviation: max_dev,
        region: format!(
            "{count} of {} cells; excluded |z| < {}, {} cells around the support boundary{}",
            grid.len(),
            exclusions.core_radius,
            exclusions.collar_cells,
            if expected.is_some() {
                format!(", cells expecting < {} eigenvalues", exclusions.min_expected)
            } else {
                String::new()
            }
        ),
        exclusions,
        included_cells: count,
        total_cells: grid.len(),
        included_mass: mass,
        sample_counts: empirical.counts.clone(),
        expected_counts: expected,
        included,
    })
}
