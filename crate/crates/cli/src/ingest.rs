//! CSV ingestion: rows are observations, columns are variables, unless
//! `transpose` is set.

use std::path::Path;

use anyhow::{bail, Context, Result};
use covtest::{Matrix, ObservationMatrix};

#[derive(Debug, Clone, Copy)]
pub struct CsvFormat {
    pub header: bool,
    pub delimiter: u8,
    pub transpose: bool,
}

pub fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "\\t" | "tab" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character, got {s:?}")),
    }
}

pub fn read_matrix(path: &Path, fmt: CsvFormat) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(fmt.header)
        .delimiter(fmt.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().with_context(|| {
                    format!("{}: line {line}, column {}: cannot parse {field:?} as a number", path.display(), j + 1)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let m = Matrix::from_rows(&rows).with_context(|| format!("{}: ragged rows", path.display()))?;
    Ok(if fmt.transpose { m.transpose() } else { m })
}

pub fn read_observations(path: &Path, fmt: CsvFormat) -> Result<ObservationMatrix> {
    let m = read_matrix(path, fmt)?;
    ObservationMatrix::new(m).with_context(|| format!("{}: invalid observation matrix", path.display()))
}
