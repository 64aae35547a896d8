//! `freeconv`: file-based front end for the spectral calculus of sums and
//! products of free random matrices.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 partial numerical
//! failure (output written, more than 5% of points failed), 3 failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use freeconv::nonhermitian::HOLE_LIMIT;

use crate::config::{Command, JobConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "freeconv", version, about)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON job configuration; flags override its keys
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Worker threads; output does not depend on it
    #[arg(long, env = "FREECONV_WORKERS")]
    workers: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] freeconv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::File {
            path: path.to_owned(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        use freeconv::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(
                E::InvalidSpec(_) | E::InvalidArgument(_) | E::OriginExcluded | E::GridMismatch(_) | E::CenteredSTransform { .. },
            ) => 1,
            CliError::Core(E::TooManyHoles { .. } | E::SkipRate { .. }) => 2,
            _ => 3,
        }
    }
}

fn load(cli: Cli) -> Result<(config::Job, Option<usize>), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str::<JobConfig>(&text)
                .map_err(|e| CliError::Validation(vec![format!("{}: {e}", path.display())]))?
        }
        None => JobConfig::default(),
    };
    cfg.apply(cli.overrides);
    Ok((config::resolve(cli.command, cfg)?, cli.workers))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(cli).and_then(|(job, workers)| {
        freeconv::par::with_workers(workers, || commands::run(&job)).map(|outcome| (job, outcome))
    });
    match result {
        Ok((_, outcome)) if outcome.total > 0 && outcome.failed == outcome.total => {
            eprintln!("error: all {} points failed", outcome.total);
            ExitCode::from(3)
        }
        Ok((_, outcome)) if outcome.failed as f64 > HOLE_LIMIT * outcome.total as f64 => {
            eprintln!("warning: {} of {} points failed", outcome.failed, outcome.total);
            ExitCode::from(2)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
