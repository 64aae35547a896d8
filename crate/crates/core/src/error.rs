use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("origin excluded: z = 0 is not a valid spectral point")]
    OriginExcluded,

    #[error("singular matrix (|det| = {det:e})")]
    Singular { det: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("branch undecided at z = {z}: competing solutions are within tolerance")]
    BranchUndecided { z: Complex64 },

    #[error("S transform undefined for centered ensemble (first cumulant {kappa1}); use the R-transform multiplication system")]
    CenteredSTransform { kappa1: Complex64 },

    #[error("density has imaginary contamination {contamination:e}")]
    NonRealDensity { contamination: f64 },

    #[error("invalid specification: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{failed} of {total} grid points failed to solve (limit 5%)")]
    TooManyHoles { failed: usize, total: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("eigensolver skipped {skipped} of {trials} trials (limit 1%)")]
    SkipRate { skipped: usize, trials: usize },

    #[error("eigenvalue cloud is empty")]
    EmptyCloud,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
