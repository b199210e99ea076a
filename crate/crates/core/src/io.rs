//! Plain-text matrix and vector files.
//!
//! A matrix file starts with a `<rows> <cols>` header line followed by the
//! entries in row-major order, whitespace separated. A vector file starts
//! with `<len>`. Values are written with 17 significant digits so a
//! write/read cycle reproduces every `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linops::{DenseMatrix, DenseVector};

fn fmt_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokens(body: &str, first_line: usize) -> impl Iterator<Item = Token<'_>> {
    body.lines().enumerate().flat_map(move |(n, line)| {
        let line_no = first_line + n;
        line.split_whitespace().map(move |t| Token {
            text: t,
            line: line_no,
            // byte offset of a sub-slice within its parent line
            column: t.as_ptr() as usize - line.as_ptr() as usize + 1,
        })
    })
}

fn split_header(text: &str) -> Result<(&str, &str)> {
    match text.split_once('\n') {
        Some((h, rest)) => Ok((h, rest)),
        None if !text.trim().is_empty() => Ok((text, "")),
        None => Err(Error::MalformedHeader {
            line: 1,
            reason: "empty input".into(),
        }),
    }
}

fn parse_dims(header: &str, want: usize) -> Result<Vec<usize>> {
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != want {
        return Err(Error::MalformedHeader {
            line: 1,
            reason: format!("expected {want} dimension(s), found {}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| match p.parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::MalformedHeader {
                line: 1,
                reason: format!("`{p}` is not a positive integer"),
            }),
            Ok(n) => Ok(n),
        })
        .collect()
}

fn parse_values(body: &str, expected: usize) -> Result<Vec<f64>> {
    let mut values = Vec::with_capacity(expected);
    for (i, tok) in tokens(body, 2).enumerate() {
        let index = i + 1;
        let v: f64 = tok.text.parse().map_err(|_| Error::InvalidToken {
            line: tok.line,
            column: tok.column,
            index,
            token: tok.text.to_string(),
        })?;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                line: tok.line,
                column: tok.column,
                index,
                token: tok.text.to_string(),
            });
        }
        values.push(v);
    }
    if values.len() != expected {
        return Err(Error::EntryCount {
            expected,
            found: values.len(),
        });
    }
    Ok(values)
}

pub fn parse_matrix(text: &str) -> Result<DenseMatrix> {
    let (header, body) = split_header(text)?;
    let dims = parse_dims(header, 2)?;
    let (rows, cols) = (dims[0], dims[1]);
    let values = parse_values(body, rows * cols)?;
    Ok(DenseMatrix::from_row_slice(rows, cols, &values))
}

pub fn parse_vector(text: &str) -> Result<DenseVector> {
    let (header, body) = split_header(text)?;
    let len = parse_dims(header, 1)?[0];
    Ok(DenseVector::from_vec(parse_values(body, len)?))
}

pub fn format_matrix(m: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            fmt_value(&mut out, *v);
        }
        out.push('\n');
    }
    out
}

pub fn format_vector(v: &DenseVector) -> String {
    let mut out = format!("{}\n", v.len());
    for x in v.iter() {
        fmt_value(&mut out, *x);
        out.push('\n');
    }
    out
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_matrix(&read(path.as_ref())?)
}

pub fn write_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &format_matrix(m))
}

pub fn read_vector(path: impl AsRef<Path>) -> Result<DenseVector> {
    parse_vector(&read(path.as_ref())?)
}

pub fn write_vector(v: &DenseVector, path: impl AsRef<Path>) -> Result<()> {
    write(path.as_ref(), &format_vector(v))
}
