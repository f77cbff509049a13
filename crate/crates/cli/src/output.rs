//! File placement and CSV/JSON emission.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Environment variable that redirects every output file into a directory.
pub const OUT_DIR_VAR: &str = "FLUXQUANT_OUT";

/// `--out` (or `default_name`), moved into `$FLUXQUANT_OUT` when set.
pub fn output_path(requested: Option<&Path>, default_name: &str) -> PathBuf {
    let path = requested.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(default_name));
    match std::env::var_os(OUT_DIR_VAR).filter(|d| !d.is_empty()) {
        Some(dir) => {
            let name = path.file_name().map(PathBuf::from).unwrap_or_else(|| default_name.into());
            PathBuf::from(dir).join(name)
        }
        None => path,
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Shortest round-trip form, so identical runs give identical bytes;
/// exponent notation outside `[1e-4, 1e6)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e6).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Invalid(format!("cannot serialize output: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `<stem>.meta.json` next to a CSV output.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}
