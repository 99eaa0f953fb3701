//! CSV matrices, 16-bit PGM maps and JSON files.
//!
//! A matrix file starts with a `rows,cols` header followed by one line per
//! row. Floats are written with 17 significant digits so a write-read cycle
//! is exact; binary matrices use `0`/`1`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use blf_core::Matrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(CliError::io(path))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

/// Formats a float so that parsing it back gives the same bits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_matrix_csv(m: &Matrix, path: &Path) -> CliResult<()> {
    write_values_csv(m.rows(), m.cols(), m.as_slice(), path)
}

/// Writes row-major `values` as a `rows × cols` float matrix.
pub fn write_values_csv(rows: usize, cols: usize, values: &[f64], path: &Path) -> CliResult<()> {
    assert_eq!(values.len(), rows * cols, "matrix shape does not match its data");
    let mut s = format!("{rows},{cols}\n");
    for r in 0..rows {
        for (c, x) in values[r * cols..(r + 1) * cols].iter().enumerate() {
            if c > 0 {
                s.push(',');
            }
            s.push_str(&format_float(*x));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_mask_csv(rows: usize, cols: usize, mask: &[bool], path: &Path) -> CliResult<()> {
    assert_eq!(mask.len(), rows * cols, "mask shape does not match its data");
    let mut s = format!("{rows},{cols}\n");
    for r in 0..rows {
        for c in 0..cols {
            if c > 0 {
                s.push(',');
            }
            s.push(if mask[r * cols + c] { '1' } else { '0' });
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Parses matrix text into `(rows, cols, row-major fields)`. Line numbers in
/// errors are 1-based.
fn parse_cells<T>(
    text: &str,
    path: &Path,
    mut cell: impl FnMut(&str) -> Result<T, String>,
) -> CliResult<(usize, usize, Vec<T>)> {
    let err = |line: usize, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let header = lines.first().ok_or_else(|| err(1, "empty file; expected a `rows,cols` header".into()))?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let (rows, cols) = match dims.as_slice() {
        [r, c] => match (r.parse::<usize>(), c.parse::<usize>()) {
            (Ok(r), Ok(c)) => (r, c),
            _ => return Err(err(1, format!("bad header `{header}`; expected `rows,cols`"))),
        },
        _ => return Err(err(1, format!("bad header `{header}`; expected `rows,cols`"))),
    };
    let mut out = Vec::with_capacity(rows * cols);
    for (i, line) in lines.iter().enumerate().skip(1) {
        let fields: Vec<&str> =
            if cols == 0 && line.trim().is_empty() { Vec::new() } else { line.split(',').collect() };
        if fields.len() != cols {
            return Err(err(i + 1, format!("expected {cols} values, found {}", fields.len())));
        }
        for f in fields {
            out.push(cell(f.trim()).map_err(|m| err(i + 1, m))?);
        }
    }
    let found = lines.len() - 1;
    if found != rows {
        // Point at the first surplus row, or just past the end when rows are missing.
        let line = if found > rows { rows + 2 } else { lines.len() + 1 };
        return Err(err(line, format!("header declares {rows} rows but the file has {found}")));
    }
    Ok((rows, cols, out))
}

pub fn read_matrix_csv(path: &Path) -> CliResult<Matrix> {
    let text = read_text(path)?;
    let (rows, cols, values) =
        parse_cells(&text, path, |f| f.parse::<f64>().map_err(|_| format!("`{f}` is not a number")))?;
    Ok(Matrix::from_row_major(rows, cols, values)?)
}

/// Reads a 0/1 matrix as `(rows, cols, mask)`.
pub fn read_mask_csv(path: &Path) -> CliResult<(usize, usize, Vec<bool>)> {
    let text = read_text(path)?;
    parse_cells(&text, path, |f| match f {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(format!("`{f}` is not 0 or 1")),
    })
}

/// Writes a `[0, 1]` map as binary 16-bit PGM (big-endian, maxval 65535).
/// Values outside the range are clamped; NaN becomes 0.
pub fn write_pgm16(rows: usize, cols: usize, values: &[f64], path: &Path) -> CliResult<()> {
    assert_eq!(values.len(), rows * cols, "map shape does not match its data");
    let mut bytes = format!("P5\n{cols} {rows}\n65535\n").into_bytes();
    for &p in values {
        let p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
        let level = (p * 65535.0).round() as u16;
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, bytes).map_err(CliError::io(path))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> CliResult<()> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

/// Writes a table with a header row; the first column is an integer index.
pub fn write_table_csv(header: &[String], index: &[usize], columns: &[Vec<f64>], path: &Path) -> CliResult<()> {
    let mut s = header.join(",");
    s.push('\n');
    for (i, ix) in index.iter().enumerate() {
        let _ = write!(s, "{ix}");
        for col in columns {
            s.push(',');
            s.push_str(&format_float(col[i]));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_roundtrips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, f64::MIN_POSITIVE, 5e-324, 1.7976931348623157e308, 0.0, -0.0, 123456789.125]
        {
            let y: f64 = format_float(x).parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{x}");
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let p = Path::new("m.csv");
        let f = |t: &str| parse_cells(t, p, |f| f.parse::<f64>().map_err(|e| e.to_string()));
        match f("2,3\n1,2,3,4,5,6,7\n1,2,3\n") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(f(""), Err(CliError::Parse { line: 1, .. })));
        assert!(matches!(f("2,2\n1,2\n"), Err(CliError::Parse { .. })));
        assert!(matches!(f("1,2\n1,x\n"), Err(CliError::Parse { line: 2, .. })));
        assert!(matches!(f("a,b\n"), Err(CliError::Parse { line: 1, .. })));
        let (r, c, v) = f("2,2\n1,2\n3,4\n\n").unwrap();
        assert_eq!((r, c, v), (2, 2, vec![1.0, 2.0, 3.0, 4.0]));
    }
}
