//! Report files: JSON envelopes and CSV grid dumps.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;
use crate::error::CliError;

pub const TOOL: &str = "ppwave";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub config: &'a ResolvedConfig,
    pub result: T,
}

/// SHA-256 of the resolved configuration's JSON form, hex encoded.
pub fn config_hash(config: &ResolvedConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    Ok(dir.join(name))
}

pub fn write_json<T: Serialize>(
    dir: &Path,
    name: &str,
    command: &'static str,
    config: &ResolvedConfig,
    result: T,
) -> Result<PathBuf, CliError> {
    let path = output_path(dir, name)?;
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        command,
        config_hash: config_hash(config),
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&envelope).map_err(|e| io_error(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Shortest round-trip text, switching to exponent form for very small or
/// very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 {
        "0".to_string()
    } else if !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Grid metadata for the two header lines of a CSV dump.
pub struct GridHeader<'a> {
    pub names: &'a [&'a str],
    pub nodes: &'a [usize],
    pub ranges: &'a [[f64; 2]],
}

/// Writes `# dims ...` and `# ranges ...` lines, then the column names and
/// one row per node in row-major order (last chart axis fastest).
pub fn write_csv(dir: &Path, name: &str, header: &GridHeader<'_>, columns: &[String], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
    let path = output_path(dir, name)?;
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    let mut out = BufWriter::new(file);
    let dims: Vec<String> = header.names.iter().zip(header.nodes).map(|(n, k)| format!("{n}={k}")).collect();
    let ranges: Vec<String> = header
        .names
        .iter()
        .zip(header.ranges)
        .map(|(n, r)| format!("{n}=[{},{}]", fmt_f64(r[0]), fmt_f64(r[1])))
        .collect();
    writeln!(out, "# dims {}", dims.join(" ")).map_err(|e| io_error(&path, e))?;
    writeln!(out, "# ranges {}", ranges.join(" ")).map_err(|e| io_error(&path, e))?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(columns).map_err(|e| io_error(&path, e))?;
    for row in rows {
        writer
            .write_record(row.iter().map(|&x| fmt_f64(x)))
            .map_err(|e| io_error(&path, e))?;
    }
    writer.flush().map_err(|e| io_error(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -0.25, 3.0e-25, 1.0 / 3.0, 6.02e23, -1e-4] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(4e-25), "4e-25");
        assert_eq!(fmt_f64(0.5), "0.5");
    }
}
