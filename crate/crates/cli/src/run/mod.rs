pub mod analyze;
pub mod calibrate;
pub mod gen;
pub mod map;
pub mod pipeline;

use std::fmt::Display;

use noisecal::calibrate::OptionalStat;

use crate::error::{CliError, CliResult};

/// CSV bytes of serializable rows, header included.
pub fn csv_bytes<T: serde::Serialize>(rows: &[T]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    noisecal::analytics::write_csv(rows, &mut buf)?;
    Ok(buf)
}

/// CSV bytes with an explicit header, for reports whose rows may be empty.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::runtime(e.to_string())
}

pub fn opt(v: Option<f64>) -> String {
    OptionalStat(v).to_string()
}

pub fn num(v: impl Display) -> String {
    v.to_string()
}

pub fn json_bytes(v: &impl serde::Serialize) -> CliResult<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    Ok(text.into_bytes())
}
