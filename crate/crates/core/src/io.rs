//! Plain-text file formats: matrices as header-less CSV, orderings as one
//! value per line. Positions in files are 1-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, SabreError};
use crate::matrix::SymMatrix;
use crate::perm::ComparisonMatrix;

/// Shortest round-trip decimal rendering.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

pub fn matrix_to_csv(m: &SymMatrix) -> String {
    let mut out = String::with_capacity(m.n() * m.n() * 8);
    for row in m.rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<SymMatrix> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| SabreError::Parse {
                    line: line_no + 1,
                    message: format!("'{}': {e}", tok.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
            return Err(SabreError::Parse {
                line: line_no + 1,
                message: format!("non-finite value {bad}"),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SabreError::EmptyMatrix);
    }
    SymMatrix::from_rows(rows)
}

pub fn write_matrix_csv(path: &Path, m: &SymMatrix) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<SymMatrix> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn comparison_to_csv(h: &ComparisonMatrix) -> String {
    let mut out = String::new();
    for row in h.to_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_positions(path: &Path, positions: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(positions.len() * 5);
    for p in positions {
        writeln!(out, "{p}").expect("writing to a String");
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_scores(path: &Path, scores: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(scores.len() * 6);
    for s in scores {
        writeln!(out, "{s}").expect("writing to a String");
    }
    fs::write(path, out)?;
    Ok(())
}

/// One real value per line; blank lines are skipped.
pub fn parse_scores(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let v = l.trim().parse::<f64>().map_err(|e| SabreError::Parse {
                line: k + 1,
                message: format!("'{}': {e}", l.trim()),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(SabreError::Parse {
                    line: k + 1,
                    message: format!("non-finite value {v}"),
                })
            }
        })
        .collect()
}

pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    parse_scores(&fs::read_to_string(path)?)
}

/// Integer positions; rejects fractional values.
pub fn read_positions(path: &Path) -> Result<Vec<usize>> {
    read_scores(path)?
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            if v.fract() == 0.0 && v >= 1.0 {
                Ok(v as usize)
            } else {
                Err(SabreError::Parse {
                    line: k + 1,
                    message: format!("expected a positive integer position, got {v}"),
                })
            }
        })
        .collect()
}
