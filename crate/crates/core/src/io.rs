//! File formats: matrix CSV, decomposition JSON, measurement batches.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurements::MeasurementBatch;
use crate::spectral::SpectralDecomposition;

/// Writes to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_rows(text: &str, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{what} row {}: {e}", i + 1)))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "{what} row {}, column {}: cannot parse {field:?} as a number",
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(j) = row.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parse(format!(
                "{what} row {}, column {}: value is not finite",
                i + 1,
                j + 1
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{what}: no rows")));
    }
    Ok(rows)
}

/// Row-major matrix without header.
pub fn parse_matrix_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    parse_rows(text, "matrix")
}

pub fn read_matrix_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

/// One measurement per row, without header.
pub fn parse_measurements_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    parse_rows(text, "measurements")
}

pub fn read_measurements_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_measurements_csv(&fs::read_to_string(path)?)
}

pub fn rows_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| crate::study::fmt_float(*x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decomposition_json(op: &SpectralDecomposition) -> String {
    serde_json::to_string_pretty(&op.summary()).expect("summary serializes")
}

/// Sidecar metadata of an exported batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchMeta {
    pub n: usize,
    pub seed: u64,
    pub model_tag: String,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the samples as CSV and `{n, seed, model_tag}` next to it.
pub fn write_batch(batch: &MeasurementBatch, csv_path: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = batch.samples.iter().map(|s| s.coefficients.clone()).collect();
    write_atomic(csv_path, rows_csv(&rows).as_bytes())?;
    let meta = BatchMeta {
        n: batch.n,
        seed: batch.seed,
        model_tag: batch.model_tag.clone(),
    };
    let json = serde_json::to_string_pretty(&meta)?;
    write_atomic(&sidecar_path(csv_path), json.as_bytes())
}

/// Reads a batch written by [`write_batch`].
pub fn read_batch(csv_path: &Path) -> Result<(Vec<Vec<f64>>, BatchMeta)> {
    let rows = read_measurements_csv(csv_path)?;
    let meta: BatchMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(csv_path))?)?;
    if meta.n != rows.len() {
        return Err(Error::Parse(format!(
            "sidecar declares n = {}, file has {} rows",
            meta.n,
            rows.len()
        )));
    }
    Ok((rows, meta))
}
