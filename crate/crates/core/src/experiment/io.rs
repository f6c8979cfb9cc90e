//! CSV datasets (`x1,…,xd,z`) and JSON provenance sidecars.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::loo::Dataset;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed data: {0}")]
    Format(String),
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|source| IoError::File { path: path.to_owned(), source })
}

fn create(path: &Path) -> Result<File, IoError> {
    File::create(path).map_err(|source| IoError::File { path: path.to_owned(), source })
}

fn parse_rows<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| IoError::Format(format!("row {}: `{f}` is not a number", line + 1))))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn design_header(d: usize) -> Vec<String> {
    (1..=d).map(|m| format!("x{m}")).collect()
}

/// Reads a dataset with header `x1,…,xd,z`.
pub fn read_dataset_from<R: Read>(reader: R) -> Result<Dataset, IoError> {
    let (header, rows) = parse_rows(reader)?;
    if header.len() < 2 {
        return Err(IoError::Format("expected columns x1,…,xd,z".into()));
    }
    let d = header.len() - 1;
    let mut expected = design_header(d);
    expected.push("z".into());
    if header != expected {
        return Err(IoError::Format(format!("header must be `{}`, found `{}`", expected.join(","), header.join(","))));
    }
    if rows.is_empty() {
        return Err(IoError::Format("no data rows".into()));
    }
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let z = DVector::from_fn(rows.len(), |i, _| rows[i][d]);
    Dataset::new(x, z).map_err(|e| IoError::Format(e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    read_dataset_from(open(path)?)
}

/// Reads a design with header `x1,…,xd`.
pub fn read_design(path: &Path) -> Result<DMatrix<f64>, IoError> {
    let (header, rows) = parse_rows(open(path)?)?;
    if header != design_header(header.len()) || header.is_empty() {
        return Err(IoError::Format(format!("design header must be x1,…,xd, found `{}`", header.join(","))));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(IoError::Format("non-finite design value".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), header.len(), |i, j| rows[i][j]))
}

fn write_matrix<W: Write>(writer: W, x: &DMatrix<f64>, z: Option<&DVector<f64>>) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = design_header(x.ncols());
    if z.is_some() {
        header.push("z".into());
    }
    wtr.write_record(&header)?;
    for i in 0..x.nrows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(z) = z {
            rec.push(z[i].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|source| IoError::File { path: PathBuf::from("<csv>"), source })?;
    Ok(())
}

pub fn write_dataset_to<W: Write>(writer: W, data: &Dataset) -> Result<(), IoError> {
    write_matrix(writer, &data.x, Some(&data.z))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), IoError> {
    write_dataset_to(create(path)?, data)
}

pub fn write_design(path: &Path, x: &DMatrix<f64>) -> Result<(), IoError> {
    write_matrix(create(path)?, x, None)
}

/// Writes serializable rows as an RFC-4180 CSV table.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|source| IoError::File { path: path.to_owned(), source })?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Sidecar<'a, T: Serialize> {
    schema_version: u32,
    command: &'a [String],
    spec: &'a T,
}

/// `<output>.json` beside a CSV output, recording the command line and the resolved spec.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

pub fn write_sidecar<T: Serialize>(output: &Path, command: &[String], spec: &T) -> Result<PathBuf, IoError> {
    let path = sidecar_path(output);
    let file = create(&path)?;
    serde_json::to_writer_pretty(file, &Sidecar { schema_version: SCHEMA_VERSION, command, spec })?;
    Ok(path)
}
