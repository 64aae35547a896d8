//! Table and report writers. Floats in CSV carry 17 significant digits.

use std::fs::File;
use std::io::{self, BufWriter, Write};

use freeconv::montecarlo::SCHEMA_VERSION;
use serde::Serialize;

use crate::config::Job;
use crate::CliError;

pub fn num(x: f64) -> String {
    if x.is_finite() {
        // adding zero folds -0 into +0
        format!("{:.16e}", x + 0.0)
    } else {
        String::new()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn sink(job: &Job) -> Result<Box<dyn Write>, CliError> {
    Ok(match &job.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    job: &'a Job,
    result: &'a T,
}

pub fn provenance(job: &Job) -> Result<String, CliError> {
    Ok(serde_json::to_string(&Envelope {
        schema_version: SCHEMA_VERSION,
        job,
        result: &(),
    })?)
}

pub fn write_json<T: Serialize>(job: &Job, result: &T) -> Result<(), CliError> {
    let mut out = sink(job)?;
    serde_json::to_writer_pretty(
        &mut out,
        &Envelope {
            schema_version: SCHEMA_VERSION,
            job,
            result,
        },
    )?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Comment line with the resolved job, a header row, then the rows.
pub fn write_csv(job: &Job, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = sink(job)?;
    writeln!(out, "# provenance: {}", provenance(job)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
