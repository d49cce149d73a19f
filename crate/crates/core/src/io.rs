//! Plain-text matrix and vector files.
//!
//! One row per line, entries separated by single commas, no header. Values
//! are written with 17 significant digits so they parse back bit-exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_matrix(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..a.rows() {
        let row: Vec<String> = (0..a.cols()).map(|j| format_float(a.get(i, j))).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Writes `u` as a single column.
pub fn write_vector(u: &[f64]) -> String {
    let mut out = String::new();
    for v in u {
        let _ = writeln!(out, "{}", format_float(*v));
    }
    out
}

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("`{field}` is not a number"),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse { line: line_no, message: format!("non-finite entry `{field}`") })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} entries, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 0, message: "no data rows".into() });
    }
    Ok(rows)
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    DenseMatrix::from_rows(&parse_rows(text)?)
}

/// Accepts either a single row or a single column.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let rows = parse_rows(text)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().expect("one row"));
    }
    if rows[0].len() == 1 {
        return Ok(rows.into_iter().map(|r| r[0]).collect());
    }
    Err(Error::Parse {
        line: 1,
        message: format!("expected a single row or column, found {}x{}", rows.len(), rows[0].len()),
    })
}
