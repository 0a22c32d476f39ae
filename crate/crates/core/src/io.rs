//! CSV exchange formats. Numbers are written in shortest round-trip form and
//! files are replaced atomically (temporary file plus rename).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{EnsembleResult, ScanTable};

/// Header of profile and signal files.
pub const PROFILE_HEADER: [&str; 2] = ["z_m", "value"];
pub const ENSEMBLE_HEADER: [&str; 4] = ["z_m", "algorithm", "mean", "std"];
pub const SCAN_HEADER: [&str; 2] = ["parameter", "discrepancy"];

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes a header and string rows as CSV, atomically.
pub fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(&row).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_atomic(path, &bytes)
}

/// `z_m,value` file, one row per grid point.
pub fn write_profile_csv(path: &Path, heights: &[f64], values: &[f64]) -> Result<()> {
    if heights.len() != values.len() {
        return Err(Error::Dimension {
            context: "profile CSV",
            expected: heights.len(),
            found: values.len(),
        });
    }
    write_rows(
        path,
        &PROFILE_HEADER,
        heights
            .iter()
            .zip(values)
            .map(|(z, v)| vec![format_f64(*z), format_f64(*v)]),
    )
}

/// Reads a `z_m,value` file into `(heights, values)`.
pub fn read_profile_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != PROFILE_HEADER {
        return Err(bad(format!("expected header 'z_m,value', found '{}'", header.iter().collect::<Vec<_>>().join(","))));
    }
    let mut heights = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parse = |k: usize| -> Result<f64> {
            record[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: '{}': {e}", line + 2, &record[k])))
        };
        heights.push(parse(0)?);
        values.push(parse(1)?);
    }
    Ok((heights, values))
}

/// `z_m,algorithm,mean,std`, grouped by algorithm.
pub fn write_ensemble_csv(path: &Path, result: &EnsembleResult) -> Result<()> {
    let rows = result.algorithms.iter().flat_map(|a| {
        result.heights.iter().enumerate().map(move |(j, z)| {
            vec![
                format_f64(*z),
                a.algorithm().name().to_string(),
                format_f64(a.mean[j]),
                format_f64(a.std[j]),
            ]
        })
    });
    write_rows(path, &ENSEMBLE_HEADER, rows)
}

/// `parameter,discrepancy`, one row per scanned value.
pub fn write_scan_csv(path: &Path, table: &ScanTable) -> Result<()> {
    write_rows(
        path,
        &SCAN_HEADER,
        table
            .rows
            .iter()
            .map(|r| vec![format_f64(r.parameter), format_f64(r.discrepancy)]),
    )
}
