//! Matrix Market coordinate files and plain vector files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::blocksparse::{BlockSparseMatrix, Triplet};
use crate::error::{CeError, Result};
use crate::scalar::Scalar;

/// Reads a square real coordinate file. Symmetric files are expanded so the
/// returned entries list both triangles; indices come back 0-based.
pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<(Vec<Triplet<T>>, usize)> {
    parse_matrix_market(BufReader::new(File::open(path)?))
}

pub fn parse_matrix_market<T: Scalar, R: BufRead>(reader: R) -> Result<(Vec<Triplet<T>>, usize)> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CeError::Parse { line: 1, msg: "empty file".into() })?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(CeError::Parse { line: 1, msg: format!("malformed header `{header}`") });
    }
    if tokens[2] != "coordinate" {
        return Err(CeError::Parse { line: 1, msg: format!("unsupported format `{}`", tokens[2]) });
    }
    if tokens[3] != "real" {
        return Err(CeError::Parse { line: 1, msg: format!("unsupported field `{}`", tokens[3]) });
    }
    let symmetric = match tokens[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => {
            return Err(CeError::Parse { line: 1, msg: format!("unsupported symmetry `{other}`") })
        }
    };

    let mut size: Option<(usize, usize)> = None;
    let mut entries = Vec::new();
    let mut listed = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| CeError::Parse { line: lineno, msg: msg.to_string() };
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(bad("expected `rows cols nnz`"));
                }
                let r: usize = fields[0].parse().map_err(|_| bad("bad row count"))?;
                let c: usize = fields[1].parse().map_err(|_| bad("bad column count"))?;
                let nnz: usize = fields[2].parse().map_err(|_| bad("bad entry count"))?;
                if r != c {
                    return Err(bad("matrix is not square"));
                }
                size = Some((r, nnz));
                entries.reserve(if symmetric { 2 * nnz } else { nnz });
            }
            Some((n, _)) => {
                if fields.len() != 3 {
                    return Err(bad("expected `row col value`"));
                }
                let i: usize = fields[0].parse().map_err(|_| bad("bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| bad("bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad("bad value"))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(CeError::IndexOutOfRange { row: i, col: j, n });
                }
                let v = T::lit(v);
                listed += 1;
                entries.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    entries.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| CeError::Parse { line: 1, msg: "missing size line".into() })?;
    if listed != nnz {
        return Err(CeError::Parse { line: 2, msg: format!("expected {nnz} entries, found {listed}") });
    }
    Ok((entries, n))
}

/// Writes the lower triangle in symmetric coordinate format, 17 significant digits.
pub fn write_matrix_market<T: Scalar>(a: &BlockSparseMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    format_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn format_matrix_market<T: Scalar, W: Write>(a: &BlockSparseMatrix<T>, w: &mut W) -> Result<()> {
    let lower = a.lower_triplets();
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.dim(), a.dim(), lower.len())?;
    for (i, j, v) in lower {
        writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v.as_f64())?;
    }
    Ok(())
}

/// One value per line.
pub fn read_vector<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| CeError::Parse { line: idx + 1, msg: format!("bad value `{t}`") })?;
        out.push(T::lit(v));
    }
    Ok(out)
}

pub fn write_vector<T: Scalar>(x: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in x {
        writeln!(w, "{:.16e}", v.as_f64())?;
    }
    w.flush()?;
    Ok(())
}
