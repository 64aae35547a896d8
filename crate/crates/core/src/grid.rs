//! Cell-centered lattices in the complex plane.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Grid {
    Cartesian {
        x_min: f64,
        x_max: f64,
        nx: usize,
        y_min: f64,
        y_max: f64,
        ny: usize,
    },
    Polar {
        r_min: f64,
        r_max: f64,
        nr: usize,
        phi_min: f64,
        phi_max: f64,
        nphi: usize,
    },
}

impl Grid {
    pub fn cartesian(x: (f64, f64), nx: usize, y: (f64, f64), ny: usize) -> Self {
        Grid::Cartesian {
            x_min: x.0,
            x_max: x.1,
            nx,
            y_min: y.0,
            y_max: y.1,
            ny,
        }
    }

    pub fn polar(r: (f64, f64), nr: usize, phi: (f64, f64), nphi: usize) -> Self {
        Grid::Polar {
            r_min: r.0,
            r_max: r.1,
            nr,
            phi_min: phi.0,
            phi_max: phi.1,
            nphi,
        }
    }

    /// Polar grid covering the full disc of radius `r_max`.
    pub fn disc(r_max: f64, nr: usize, nphi: usize) -> Self {
        Self::polar((0.0, r_max), nr, (-PI, PI), nphi)
    }

    /// Collects every structural problem rather than stopping at the first.
    pub fn problems(&self, min_per_axis: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut axis = |name: &str, lo: f64, hi: f64, n: usize| {
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                out.push(format!("{name} range [{lo}, {hi}] must be finite and increasing"));
            }
            if n < min_per_axis {
                out.push(format!("{name} needs at least {min_per_axis} points, got {n}"));
            }
        };
        match *self {
            Grid::Cartesian { x_min, x_max, nx, y_min, y_max, ny } => {
                axis("x", x_min, x_max, nx);
                axis("y", y_min, y_max, ny);
            }
            Grid::Polar { r_min, r_max, nr, phi_min, phi_max, nphi } => {
                axis("r", r_min, r_max, nr);
                axis("phi", phi_min, phi_max, nphi);
                if r_min < 0.0 {
                    out.push(format!("r_min must be non-negative, got {r_min}"));
                }
                if phi_max - phi_min > 2.0 * PI + 1e-12 {
                    out.push("phi range exceeds one turn".into());
                }
            }
        }
        out
    }

    pub fn validate(&self, min_per_axis: usize) -> Result<()> {
        let problems = self.problems(min_per_axis);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(problems))
        }
    }

    /// Rejects grids with a point at the origin.
    pub fn validate_excludes_origin(&self) -> Result<()> {
        if self.points().iter().any(|p| p.norm() == 0.0) {
            Err(Error::OriginExcluded)
        } else {
            Ok(())
        }
    }

    /// `(n0, n1)`: x/y counts or r/φ counts.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Grid::Cartesian { nx, ny, .. } => (nx, ny),
            Grid::Polar { nr, nphi, .. } => (nr, nphi),
        }
    }

    pub fn len(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell steps along the two axes.
    pub fn steps(&self) -> (f64, f64) {
        match *self {
            Grid::Cartesian { x_min, x_max, nx, y_min, y_max, ny } => {
                ((x_max - x_min) / nx as f64, (y_max - y_min) / ny as f64)
            }
            Grid::Polar { r_min, r_max, nr, phi_min, phi_max, nphi } => {
                ((r_max - r_min) / nr as f64, (phi_max - phi_min) / nphi as f64)
            }
        }
    }

    /// Flat index of cell `(i, j)`; the second axis varies fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.shape().1 + j
    }

    pub fn unindex(&self, k: usize) -> (usize, usize) {
        let n1 = self.shape().1;
        (k / n1, k % n1)
    }

    fn axis_centers(&self) -> (Vec<f64>, Vec<f64>) {
        let (d0, d1) = self.steps();
        let (lo0, lo1) = match *self {
            Grid::Cartesian { x_min, y_min, .. } => (x_min, y_min),
            Grid::Polar { r_min, phi_min, .. } => (r_min, phi_min),
        };
        let (n0, n1) = self.shape();
        (
            (0..n0).map(|i| lo0 + (i as f64 + 0.5) * d0).collect(),
            (0..n1).map(|j| lo1 + (j as f64 + 0.5) * d1).collect(),
        )
    }

    /// Cell centers in flat-index order.
    pub fn points(&self) -> Vec<Complex64> {
        let (c0, c1) = self.axis_centers();
        let mut out = Vec::with_capacity(self.len());
        for &u in &c0 {
            for &v in &c1 {
                out.push(match self {
                    Grid::Cartesian { .. } => Complex64::new(u, v),
                    Grid::Polar { .. } => Complex64::from_polar(u, v),
                });
            }
        }
        out
    }

    /// Exact cell areas in flat-index order.
    pub fn areas(&self) -> Vec<f64> {
        let (d0, d1) = self.steps();
        match self {
            Grid::Cartesian { .. } => vec![d0 * d1; self.len()],
            Grid::Polar { .. } => {
                let (radii, _) = self.axis_centers();
                let n1 = self.shape().1;
                radii.iter().flat_map(|r| std::iter::repeat_n(r * d0 * d1, n1)).collect()
            }
        }
    }

    fn covers_full_turn(&self) -> bool {
        match *self {
            Grid::Polar { phi_min, phi_max, .. } => (phi_max - phi_min - 2.0 * PI).abs() < 1e-12,
            Grid::Cartesian { .. } => false,
        }
    }

    /// Cell containing `z`, if any.
    pub fn locate(&self, z: Complex64) -> Option<usize> {
        let (n0, n1) = self.shape();
        let (d0, d1) = self.steps();
        let (u, v, lo0, lo1) = match *self {
            Grid::Cartesian { x_min, y_min, .. } => (z.re, z.im, x_min, y_min),
            Grid::Polar { r_min, phi_min, .. } => {
                let mut phi = z.arg();
                if phi < phi_min {
                    phi += 2.0 * PI;
                }
                (z.norm(), phi, r_min, phi_min)
            }
        };
        let fi = ((u - lo0) / d0).floor();
        let fj = ((v - lo1) / d1).floor();
        if fi < 0.0 || fj < 0.0 || fi >= n0 as f64 || fj >= n1 as f64 {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    /// Cells within `radius` index steps of `k` (Chebyshev distance),
    /// wrapping in angle when the polar grid covers a full turn.
    pub fn neighborhood(&self, k: usize, radius: usize) -> Vec<usize> {
        let (n0, n1) = self.shape();
        let (i, j) = self.unindex(k);
        let wrap = self.covers_full_turn();
        let r = radius as isize;
        let mut out = Vec::new();
        for di in -r..=r {
            let ii = i as isize + di;
            if ii < 0 || ii >= n0 as isize {
                continue;
            }
            for dj in -r..=r {
                let mut jj = j as isize + dj;
                if wrap {
                    jj = jj.rem_euclid(n1 as isize);
                } else if jj < 0 || jj >= n1 as isize {
                    continue;
                }
                out.push(self.index(ii as usize, jj as usize));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Cells within `steps` grid steps of a cell whose flag differs.
    pub fn collar(&self, flags: &[bool], steps: usize) -> Vec<bool> {
        let mut out = vec![false; self.len()];
        for k in 0..self.len() {
            let differs = self.neighborhood(k, 1).into_iter().any(|n| flags[n] != flags[k]);
            if differs {
                for n in self.neighborhood(k, steps) {
                    out[n] = true;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_areas_sum_to_disc() {
        let g = Grid::disc(2.0, 40, 64);
        let total: f64 = g.areas().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn cartesian_points_and_locate() {
        let g = Grid::cartesian((-1.0, 1.0), 4, (0.0, 1.0), 2);
        let pts = g.points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], Complex64::new(-0.75, 0.25));
        for (k, p) in pts.iter().enumerate() {
            assert_eq!(g.locate(*p), Some(k));
        }
        assert_eq!(g.locate(Complex64::new(2.0, 0.5)), None);
    }

    #[test]
    fn polar_locate_round_trips() {
        let g = Grid::disc(1.5, 10, 16);
        for (k, p) in g.points().iter().enumerate() {
            assert_eq!(g.locate(*p), Some(k));
        }
    }

    #[test]
    fn validation_collects_all_problems() {
        let g = Grid::polar((-1.0, 1.0), 2, (1.0, 0.0), 10);
        let problems = g.problems(3);
        assert_eq!(problems.len(), 3, "{problems:?}");
    }

    #[test]
    fn origin_detection() {
        let g = Grid::cartesian((-1.0, 1.0), 3, (-1.0, 1.0), 3);
        assert!(matches!(g.validate_excludes_origin(), Err(Error::OriginExcluded)));
        let g = Grid::cartesian((-1.0, 1.0), 4, (-1.0, 1.0), 4);
        assert!(g.validate_excludes_origin().is_ok());
    }

    #[test]
    fn collar_marks_both_sides_of_an_edge() {
        let g = Grid::cartesian((0.0, 10.0), 10, (0.0, 1.0), 1);
        let flags: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let collar = g.collar(&flags, 2);
        let marked: Vec<usize> = (0..10).filter(|&i| collar[i]).collect();
        assert_eq!(marked, vec![2, 3, 4, 5, 6, 7]);
    }
}
