//! Plain-text matrix and sample formats.
//!
//! Matrices are CSV: one row per line, no header. Values are written in
//! scientific notation with 17 significant digits, which reads back to the
//! identical `f64`. Sample files are long-format CSV with header
//! `draw,i,j,value` and one row per upper-triangle entry `i ≤ j` (0-based).

use std::fs;
use std::io::Write;
use std::path::Path;

use wishart_minors_core::{SpdMatrix, SymMatrix};

use crate::error::CliError;

/// Largest tolerated `|a_ij − a_ji|` relative to the largest absolute entry
/// before a loaded matrix is symmetrized.
pub const ASYMMETRY_TOL: f64 = 1e-9;

/// Decimal form with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a square CSV matrix and symmetrizes it as `(A + Aᵀ)/2`. Blank lines
/// and lines starting with `#` are ignored.
pub fn parse_matrix_csv(text: &str) -> Result<SymMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::Parse(format!("line {line}: `{field}` is not a finite number")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let dim = rows.len();
    if dim == 0 {
        return Err(CliError::Parse("matrix file is empty".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(CliError::Parse(format!(
            "row {} has {} entries, expected {dim} (matrix must be square)",
            i + 1,
            r.len()
        )));
    }
    Ok(SymMatrix::symmetrized(dim, rows.concat(), ASYMMETRY_TOL)?)
}

/// Reads a scale matrix and checks that it is positive definite.
pub fn read_spd_matrix(path: &Path) -> Result<SpdMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(SpdMatrix::new(parse_matrix_csv(&text)?)?)
}

pub fn write_matrix_csv<W: Write>(m: &SymMatrix, mut w: W) -> std::io::Result<()> {
    for i in 0..m.dim() {
        let row: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub const SAMPLE_HEADER: &str = "draw,i,j,value";

pub fn write_sample_rows<W: Write>(draw: usize, m: &SymMatrix, w: &mut W) -> std::io::Result<()> {
    for i in 0..m.dim() {
        for j in i..m.dim() {
            writeln!(w, "{draw},{i},{j},{}", format_f64(m.get(i, j)))?;
        }
    }
    Ok(())
}
