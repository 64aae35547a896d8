//! Job configuration: a JSON file merged with command-line overrides, then
//! validated into a fully resolved [`Job`].

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use freeconv::ensembles::{analytic_transforms, EnsembleSpec};
use freeconv::grid::Grid;
use freeconv::montecarlo::Exclusions;
use freeconv::nonhermitian::{DensityMethod, MatrixRMap};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// G, R and S of one ensemble at a set of points
    Transform,
    /// Product solution (G, C, branch) on a grid
    SolveProduct,
    /// Support boundary of the product along rays
    Boundary,
    /// Analytic product density on a grid
    Density,
    /// Eigenvalues of sampled products
    Sample,
    /// Sampled versus analytic product density
    Compare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Quick,
    PaperScale,
}

impl Profile {
    fn default_trials(self) -> usize {
        match self {
            Profile::Quick => 100,
            Profile::PaperScale => 20_000,
        }
    }
}

/// Real points `min, min + step, ..., max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + i as f64 * step).collect()
    }

    fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if self.count == 0 {
            p.push("axis.count must be at least 1".into());
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            p.push(format!("axis range [{}, {}] is invalid", self.min, self.max));
        }
        p
    }
}

/// Near-real-axis histogram of the compare command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    pub eps: f64,
    pub bins: usize,
    pub min: f64,
    pub max: f64,
}

/// Every key is optional so that files and flags can be layered.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<Command>,
    #[serde(alias = "ensembleA")]
    pub ensemble_a: Option<EnsembleSpec>,
    #[serde(alias = "ensembleB")]
    pub ensemble_b: Option<EnsembleSpec>,
    pub grid: Option<Grid>,
    pub axis: Option<Axis>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub profile: Option<Profile>,
    pub method: Option<DensityMethod>,
    pub epsilon: Option<f64>,
    pub angular_samples: Option<usize>,
    pub radial_tolerance: Option<f64>,
    pub radial_bins: Option<usize>,
    pub exclusions: Option<Exclusions>,
    pub slice: Option<SliceConfig>,
}

fn json_arg<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| e.to_string())
}

/// Flag overrides; each mirrors the config key of the same name.
#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Ensemble A as JSON, e.g. '{"kind":"ginibre","sigma":1,"n":100}'
    #[arg(long, value_name = "JSON", value_parser = json_arg::<EnsembleSpec>)]
    pub ensemble_a: Option<EnsembleSpec>,
    /// Ensemble B as JSON; defaults to ensemble A
    #[arg(long, value_name = "JSON", value_parser = json_arg::<EnsembleSpec>)]
    pub ensemble_b: Option<EnsembleSpec>,
    /// Grid as JSON, e.g. '{"kind":"polar","r_min":0,"r_max":1.2,"nr":24,"phi_min":-3.141592653589793,"phi_max":3.141592653589793,"nphi":4}'
    #[arg(long, value_name = "JSON", value_parser = json_arg::<Grid>)]
    pub grid: Option<Grid>,
    /// Real points as JSON '{"min":-2,"max":2,"count":41}'
    #[arg(long, value_name = "JSON", value_parser = json_arg::<Axis>)]
    pub axis: Option<Axis>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output file; standard output when absent
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, value_parser = json_arg_unquoted::<DensityMethod>)]
    pub method: Option<DensityMethod>,
    /// Distance above the real axis for boundary values of G
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub angular_samples: Option<usize>,
    #[arg(long)]
    pub radial_tolerance: Option<f64>,
    #[arg(long)]
    pub radial_bins: Option<usize>,
    /// Comparison exclusions as JSON '{"core_radius":0.1,"collar_cells":2,"min_expected":10}'
    #[arg(long, value_name = "JSON", value_parser = json_arg::<Exclusions>)]
    pub exclusions: Option<Exclusions>,
    /// Near-real-axis slice as JSON '{"eps":0.01,"bins":40,"min":-1,"max":3}'
    #[arg(long, value_name = "JSON", value_parser = json_arg::<SliceConfig>)]
    pub slice: Option<SliceConfig>,
}

fn json_arg_unquoted<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    json_arg(&format!("\"{s}\""))
}

impl JobConfig {
    pub fn apply(&mut self, o: Overrides) {
        macro_rules! layer {
            ($($field:ident),*) => { $( if o.$field.is_some() { self.$field = o.$field; } )* };
        }
        layer!(
            ensemble_a,
            ensemble_b,
            grid,
            axis,
            seed,
            trials,
            output,
            format,
            profile,
            method,
            epsilon,
            angular_samples,
            radial_tolerance,
            radial_bins,
            exclusions,
            slice
        );
    }
}

/// Validated job with every default filled in. Serialized as provenance, so
/// it leaves out the output path and worker count.
#[derive(Clone, Debug, Serialize)]
pub struct Job {
    pub command: Command,
    pub ensemble_a: EnsembleSpec,
    pub ensemble_b: EnsembleSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    pub seed: u64,
    pub trials: usize,
    pub format: Format,
    pub profile: Profile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<DensityMethod>,
    pub epsilon: f64,
    pub angular_samples: usize,
    pub radial_tolerance: f64,
    pub radial_bins: usize,
    pub exclusions: Exclusions,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceConfig>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub map_a: MatrixRMap,
    #[serde(skip)]
    pub map_b: MatrixRMap,
}

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_ANGULAR_SAMPLES: usize = 256;
pub const DEFAULT_RADIAL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_RADIAL_BINS: usize = 10;

/// Polar comparison grid covering the product spectrum with room for
/// finite-size spill: 24 radial cells by 4 angular sectors.
pub fn default_compare_grid(a: &MatrixRMap, b: &MatrixRMap) -> Grid {
    let reach = a.spectral_radius_bound() * b.spectral_radius_bound();
    Grid::polar((0.0, 1.2 * reach), 24, (-std::f64::consts::PI, std::f64::consts::PI), 4)
}

pub fn resolve(command: Command, config: JobConfig) -> Result<Job, CliError> {
    let mut problems = Vec::new();
    if let Some(c) = config.command {
        if c != command {
            problems.push(format!("config is for command {c:?} but {command:?} was requested"));
        }
    }
    let a = config.ensemble_a.clone();
    let b = config.ensemble_b.clone().or_else(|| a.clone());
    let mut maps = None;
    match &a {
        None => problems.push("ensemble_a is required".into()),
        Some(a) => {
            problems.extend(a.problems().into_iter().map(|p| format!("ensemble_a: {p}")));
            let b = b.as_ref().expect("defaults to ensemble_a");
            problems.extend(b.problems().into_iter().map(|p| format!("ensemble_b: {p}")));
            if a.n != b.n {
                problems.push(format!("ensemble dimensions differ: {} vs {}", a.n, b.n));
            }
            if let (Ok(ta), Ok(tb)) = (analytic_transforms(a), analytic_transforms(b)) {
                maps = Some((ta.matrix, tb.matrix));
            }
        }
    }
    let needs_grid = matches!(command, Command::SolveProduct | Command::Density);
    if let Some(g) = &config.grid {
        problems.extend(g.problems(3).into_iter().map(|p| format!("grid: {p}")));
        if !matches!(command, Command::Compare) && g.points().iter().any(|p| p.norm() == 0.0) {
            problems.push("grid: the origin is excluded; move a cell center off z = 0".into());
        }
    } else if needs_grid {
        problems.push("grid is required".into());
    }
    if let Some(axis) = &config.axis {
        problems.extend(axis.problems());
    }
    if command == Command::Transform && config.grid.is_none() && config.axis.is_none() {
        problems.push("transform needs an axis or a grid".into());
    }
    let profile = config.profile.unwrap_or(Profile::Quick);
    let trials = config.trials.unwrap_or(profile.default_trials());
    if trials == 0 {
        problems.push("trials must be at least 1".into());
    }
    let epsilon = config.epsilon.unwrap_or(DEFAULT_EPSILON);
    if !(epsilon > 0.0) {
        problems.push(format!("epsilon must be positive, got {epsilon}"));
    }
    let angular_samples = config.angular_samples.unwrap_or(DEFAULT_ANGULAR_SAMPLES);
    if angular_samples < 8 {
        problems.push(format!("angular_samples must be at least 8, got {angular_samples}"));
    }
    let radial_tolerance = config.radial_tolerance.unwrap_or(DEFAULT_RADIAL_TOLERANCE);
    if !(radial_tolerance > 0.0) {
        problems.push(format!("radial_tolerance must be positive, got {radial_tolerance}"));
    }
    let radial_bins = config.radial_bins.unwrap_or(DEFAULT_RADIAL_BINS);
    if radial_bins < 4 {
        problems.push(format!("radial_bins must be at least 4, got {radial_bins}"));
    }
    let exclusions = config.exclusions.unwrap_or_default();
    if !(exclusions.core_radius >= 0.0 && exclusions.min_expected >= 0.0) {
        problems.push("exclusions must be non-negative".into());
    }
    if let Some(s) = &config.slice {
        if !(s.eps > 0.0) {
            problems.push(format!("slice.eps must be positive, got {}", s.eps));
        }
        if s.bins == 0 || !(s.min < s.max) {
            problems.push("slice needs bins ≥ 1 and min < max".into());
        }
    }
    if config.method == Some(DensityMethod::Empirical) && command != Command::Compare {
        problems.push("method empirical is only produced by the compare command".into());
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    let (map_a, map_b) = maps.expect("valid specs have transforms");
    let default_format = if command == Command::Compare { Format::Json } else { Format::Csv };
    let grid = match (command, config.grid) {
        (Command::Compare, None) => Some(default_compare_grid(&map_a, &map_b)),
        (_, g) => g,
    };
    let slice = config.slice.or_else(|| {
        (command == Command::Compare && profile == Profile::PaperScale).then(|| {
            let reach = map_a.spectral_radius_bound() * map_b.spectral_radius_bound();
            SliceConfig {
                eps: 1e-2,
                bins: 40,
                min: -0.5 * reach,
                max: reach,
            }
        })
    });
    Ok(Job {
        command,
        ensemble_a: a.expect("checked"),
        ensemble_b: b.expect("checked"),
        grid,
        axis: config.axis,
        seed: config.seed.unwrap_or(0),
        trials,
        format: config.format.unwrap_or(default_format),
        profile,
        method: config.method,
        epsilon,
        angular_samples,
        radial_tolerance,
        radial_bins,
        exclusions,
        slice,
        output: config.output,
        map_a,
        map_b,
    })
}
