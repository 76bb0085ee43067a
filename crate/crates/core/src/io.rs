//! Plain-text file formats.
//!
//! * features: CSV, one sample per row, no header;
//! * labels: `index,class` per line;
//! * ground truth / predictions: one class per line;
//! * weighted edges: `i,j,w` per line, each undirected edge once;
//! * BOW matrices: header `n M nnz`, then `row col value` per stored entry
//!   (zero-based indices). Entries with magnitude at most `BOW_STORE_EPS` are
//!   not written.

use std::io::{BufRead, Write};

use crate::bow::BowMatrix;
use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, WeightMatrix};
use crate::linalg::{DenseMatrix, SparseSymMatrix};

pub const BOW_STORE_EPS: f64 = 1e-12;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with their 1-based line numbers.
fn content_lines(reader: impl BufRead) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push((i + 1, t.to_string()));
        }
    }
    Ok(out)
}

fn parse_f64(line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("value {field:?} is not finite")));
    }
    Ok(v)
}

fn parse_usize(line: usize, field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} {field:?} as a non-negative integer")))
}

pub fn read_features(reader: impl BufRead) -> Result<FeatureMatrix> {
    let lines = content_lines(reader)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
    for (no, line) in &lines {
        let row = line.split(',').map(|f| parse_f64(*no, f)).collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    *no,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(0, "feature file is empty"));
    }
    FeatureMatrix::from_rows(&rows)
}

pub fn write_features(mut w: impl Write, x: &FeatureMatrix) -> Result<()> {
    for i in 0..x.n() {
        let fields: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn read_labels(reader: impl BufRead) -> Result<Vec<(usize, usize)>> {
    content_lines(reader)?
        .into_iter()
        .map(|(no, line)| {
            let mut parts = line.split(',');
            let (Some(i), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err(no, "expected `index,class`"));
            };
            Ok((parse_usize(no, i, "index")?, parse_usize(no, c, "class")?))
        })
        .collect()
}

pub fn write_labels(mut w: impl Write, assignments: &[(usize, usize)]) -> Result<()> {
    for (i, c) in assignments {
        writeln!(w, "{i},{c}")?;
    }
    Ok(())
}

pub fn read_classes(reader: impl BufRead) -> Result<Vec<usize>> {
    content_lines(reader)?
        .into_iter()
        .map(|(no, line)| parse_usize(no, &line, "class"))
        .collect()
}

pub fn write_classes(mut w: impl Write, classes: &[usize]) -> Result<()> {
    for c in classes {
        writeln!(w, "{c}")?;
    }
    Ok(())
}

/// Reads an undirected weighted edge list. The vertex count is one more than
/// the largest index mentioned.
pub fn read_edges(reader: impl BufRead) -> Result<WeightMatrix> {
    let mut triplets = Vec::new();
    for (no, line) in content_lines(reader)? {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(no, "expected `i,j,w`"));
        }
        let (i, j) = (parse_usize(no, f[0], "vertex")?, parse_usize(no, f[1], "vertex")?);
        if i == j {
            return Err(parse_err(no, format!("self-loop at vertex {i}")));
        }
        let w = parse_f64(no, f[2])?;
        if !(w > 0.0) {
            return Err(parse_err(no, format!("edge weight {w} is not positive")));
        }
        triplets.push((i, j, w));
    }
    let Some(n) = triplets.iter().map(|&(i, j, _)| i.max(j) + 1).max() else {
        return Err(parse_err(0, "edge list is empty"));
    };
    WeightMatrix::precomputed(SparseSymMatrix::from_triplets(n, triplets)?)
}

/// Reads a sparse triplet BOW file; entries must be nonnegative.
pub fn read_bow(reader: impl BufRead) -> Result<BowMatrix> {
    let lines = content_lines(reader)?;
    let Some((hno, header)) = lines.first() else {
        return Err(parse_err(0, "BOW file is empty"));
    };
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 {
        return Err(parse_err(*hno, "expected header `n M nnz`"));
    }
    let n = parse_usize(*hno, h[0], "n")?;
    let vocab = parse_usize(*hno, h[1], "M")?;
    let nnz = parse_usize(*hno, h[2], "nnz")?;
    if lines.len() - 1 != nnz {
        return Err(parse_err(
            *hno,
            format!("header declares {nnz} entries, file has {}", lines.len() - 1),
        ));
    }
    let mut data = DenseMatrix::zeros(n, vocab);
    let mut seen = std::collections::HashSet::with_capacity(nnz);
    for (no, line) in &lines[1..] {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(*no, "expected `row col value`"));
        }
        let (r, c) = (parse_usize(*no, f[0], "row")?, parse_usize(*no, f[1], "col")?);
        if r >= n || c >= vocab {
            return Err(parse_err(*no, format!("entry ({r}, {c}) outside {n}x{vocab}")));
        }
        if !seen.insert((r, c)) {
            return Err(parse_err(*no, format!("entry ({r}, {c}) repeated")));
        }
        let v = parse_f64(*no, f[2])?;
        if v < 0.0 {
            return Err(parse_err(*no, format!("negative count {v}")));
        }
        data.set(r, c, v);
    }
    BowMatrix::new(data)
}

/// Writes any `n × M` matrix (refined scores may be negative).
pub fn write_bow(mut w: impl Write, m: &BowMatrix) -> Result<()> {
    let d = m.matrix();
    let entries: Vec<(usize, usize, f64)> = (0..d.rows())
        .flat_map(|i| (0..d.cols()).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, d.get(i, j)))
        .filter(|e| e.2.abs() > BOW_STORE_EPS)
        .collect();
    writeln!(w, "{} {} {}", d.rows(), d.cols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v}")?;
    }
    Ok(())
}
