//! Plain numeric CSV in and out.
//!
//! Rows are reported by their 1-based line in the file, header included, and
//! columns by their 1-based position in the row.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use soccer_core::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {column}: cannot parse {value:?} as a number")]
    Parse { row: u64, column: usize, value: String },
    #[error("row {row}, column {column}: value is not finite")]
    NonFinite { row: u64, column: usize },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: u64, expected: usize, found: usize },
    #[error("row {row}: column {column} is out of range")]
    MissingColumn { row: u64, column: usize },
    #[error("no data rows")]
    Empty,
    #[error("{0}")]
    Dataset(#[from] soccer_core::Error),
}

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// 0-based columns to keep, in this order. All columns when `None`.
    pub columns: Option<Vec<usize>>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            has_header: false,
            columns: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset, LoadError> {
    read_csv(File::open(path)?, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset, LoadError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut coords = Vec::new();
    let mut width: Option<usize> = None;
    let mut row_buf = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        row_buf.clear();
        match &options.columns {
            Some(cols) => {
                for &c in cols {
                    let cell = record.get(c).ok_or(LoadError::MissingColumn { row, column: c + 1 })?;
                    row_buf.push(parse_cell(cell, row, c + 1)?);
                }
            }
            None => {
                for (c, cell) in record.iter().enumerate() {
                    row_buf.push(parse_cell(cell, row, c + 1)?);
                }
            }
        }
        match width {
            None => width = Some(row_buf.len()),
            Some(w) if w != row_buf.len() => {
                return Err(LoadError::Ragged {
                    row,
                    expected: w,
                    found: row_buf.len(),
                });
            }
            Some(_) => {}
        }
        coords.extend_from_slice(&row_buf);
    }
    let dim = width.ok_or(LoadError::Empty)?;
    Ok(Dataset::from_flat(dim, coords)?)
}

fn parse_cell(cell: &str, row: u64, column: usize) -> Result<f64, LoadError> {
    let v: f64 = cell.parse().map_err(|_| LoadError::Parse {
        row,
        column,
        value: cell.to_owned(),
    })?;
    if !v.is_finite() {
        return Err(LoadError::NonFinite { row, column });
    }
    Ok(v)
}

/// One line per point, comma separated, no header.
pub fn write_csv<W: Write>(writer: W, points: &Dataset) -> Result<(), LoadError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for p in points.iter() {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
