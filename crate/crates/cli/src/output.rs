//! Result files: history CSV, shift lists and JSON reports.

use std::io::Write;
use std::path::Path;

use riccati_core::{ConvergenceHistory, C64};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const HISTORY_HEADER: [&str; 5] = ["iter", "dim", "rank", "rel_residual", "seconds"];

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn history_csv(history: &ConvergenceHistory) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(HISTORY_HEADER).map_err(csv_err)?;
    for r in history.records() {
        w.write_record([
            r.iter.to_string(),
            r.dim.to_string(),
            r.rank.to_string(),
            format!("{:e}", r.rel_residual),
            format!("{:.6}", r.seconds),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
}

pub fn shifts_to_pairs(shifts: &[C64]) -> Vec<[f64; 2]> {
    shifts.iter().map(|z| [z.re, z.im]).collect()
}

/// Reads a JSON list of `[re, im]` pairs.
pub fn read_shifts(path: &Path) -> CliResult<Vec<C64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let pairs: Vec<[f64; 2]> =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(format!("json: {e}")))?;
    v.push(b'\n');
    Ok(v)
}
