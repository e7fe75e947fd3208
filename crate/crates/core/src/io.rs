//! Matrix and factor file formats.
//!
//! Text: a header line `l m`, then `l` lines of `m` whitespace-separated reals
//! written with 17 significant digits. Binary: magic `LRGM`, little-endian
//! `u64` rows and cols, then the entries as little-endian `f64`, row-major.
//! Factor files: header `l m r`, then `U` (`l` lines) and `Z` (`m` lines).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::manifold::FixedRankPoint;

pub const BINARY_MAGIC: &[u8; 4] = b"LRGM";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Text,
    Binary,
}

pub fn write_matrix_text<W: Write>(w: &mut W, a: &DenseMatrix) -> Result<()> {
    writeln!(w, "{} {}", a.nrows(), a.ncols())?;
    write_rows(w, a)
}

fn write_rows<W: Write>(w: &mut W, a: &DenseMatrix) -> Result<()> {
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| format!("{:.16e}", a[(i, j)])).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn write_matrix_binary<W: Write>(w: &mut W, a: &DenseMatrix) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            w.write_all(&a[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Parses either format, detected by the leading magic bytes.
pub fn parse_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.starts_with(BINARY_MAGIC) {
        parse_matrix_binary(bytes)
    } else {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
            line: 1,
            msg: format!("not UTF-8 text: {e}"),
        })?;
        parse_matrix_text(text)
    }
}

pub fn parse_matrix_binary(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| binary_err("truncated header"))?;
    if &magic != BINARY_MAGIC {
        return Err(binary_err("bad magic"));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)
        .map_err(|_| binary_err("truncated header"))?;
    let l = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)
        .map_err(|_| binary_err("truncated header"))?;
    let m = u64::from_le_bytes(word) as usize;
    let count = l.checked_mul(m).ok_or_else(|| binary_err("size overflow"))?;
    if r.len() != count * 8 {
        return Err(binary_err(&format!(
            "expected {} payload bytes, found {}",
            count * 8,
            r.len()
        )));
    }
    let mut a = DenseMatrix::zeros(l, m);
    for i in 0..l {
        for j in 0..m {
            r.read_exact(&mut word).expect("length checked");
            let x = f64::from_le_bytes(word);
            if !x.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
            a[(i, j)] = x;
        }
    }
    Ok(a)
}

fn binary_err(msg: &str) -> Error {
    Error::Parse {
        line: 0,
        msg: format!("binary matrix: {msg}"),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line with its 1-based number.
    fn next_nonblank(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                return Some((i + 1, line));
            }
        }
        None
    }

    fn header(&mut self, n: usize) -> Result<Vec<usize>> {
        let (line, text) = self.next_nonblank().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != n {
            return Err(Error::Parse {
                line,
                msg: format!("header must have {n} integers, found {}", fields.len()),
            });
        }
        fields
            .iter()
            .map(|f| {
                f.parse::<usize>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid dimension {f:?}"),
                })
            })
            .collect()
    }

    fn rows(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let mut a = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            let (line, text) = self.next_nonblank().ok_or(Error::Parse {
                line: 0,
                msg: format!("expected {rows} rows, found {i}"),
            })?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != cols {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {cols} values, found {}", fields.len()),
                });
            }
            for (j, f) in fields.iter().enumerate() {
                let x: f64 = f.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("invalid number {f:?}"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse {
                        line,
                        msg: format!("non-finite value {f:?}"),
                    });
                }
                a[(i, j)] = x;
            }
        }
        Ok(a)
    }

    fn expect_end(&mut self) -> Result<()> {
        if let Some((line, _)) = self.next_nonblank() {
            return Err(Error::Parse {
                line,
                msg: "trailing data".into(),
            });
        }
        Ok(())
    }
}

pub fn parse_matrix_text(text: &str) -> Result<DenseMatrix> {
    let mut lines = Lines::new(text);
    let dims = lines.header(2)?;
    let a = lines.rows(dims[0], dims[1])?;
    lines.expect_end()?;
    Ok(a)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    parse_matrix(&fs::read(path)?)
}

pub fn write_matrix(path: &Path, a: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        MatrixFormat::Text => write_matrix_text(&mut buf, a)?,
        MatrixFormat::Binary => write_matrix_binary(&mut buf, a)?,
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn write_point_text<W: Write>(w: &mut W, p: &FixedRankPoint) -> Result<()> {
    writeln!(w, "{} {} {}", p.rows(), p.cols(), p.rank())?;
    write_rows(w, p.u())?;
    write_rows(w, p.z())
}

pub fn parse_point_text(text: &str) -> Result<FixedRankPoint> {
    let mut lines = Lines::new(text);
    let dims = lines.header(3)?;
    let (l, m, r) = (dims[0], dims[1], dims[2]);
    let u = lines.rows(l, r)?;
    let z = lines.rows(m, r)?;
    lines.expect_end()?;
    FixedRankPoint::new(u, z)
}

pub fn read_point(path: &Path) -> Result<FixedRankPoint> {
    parse_point_text(&fs::read_to_string(path)?)
}

pub fn write_point(path: &Path, p: &FixedRankPoint) -> Result<()> {
    let mut buf = Vec::new();
    write_point_text(&mut buf, p)?;
    fs::write(path, buf)?;
    Ok(())
}
