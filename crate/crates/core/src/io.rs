//! Plain-text matrix files.
//!
//! A matrix file starts with a header line `rows cols` followed by `rows`
//! lines of `cols` whitespace-separated decimal reals. Mixing matrices use
//! `d k`; datasets use `N d` (one observation per line). Values are written
//! in shortest round-trip form, so reading back is lossless.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{PrismError, Result};

/// Renders a matrix in the text format.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    w.write_all(format_matrix(m).as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> PrismError {
    PrismError::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<DMatrix<f64>> {
    let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let header = header?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(hline, format!("expected `rows cols`, got `{header}`")));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| parse_err(hline, format!("bad row count `{}`", dims[0])))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| parse_err(hline, format!("bad column count `{}`", dims[1])))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        let line = line?;
        if seen == rows {
            return Err(parse_err(lineno, format!("more than {rows} data rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad number `{tok}`")))?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(parse_err(
                lineno,
                format!("expected {cols} values, found {}", data.len() - before),
            ));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(hline, format!("header promises {rows} rows, found {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}
