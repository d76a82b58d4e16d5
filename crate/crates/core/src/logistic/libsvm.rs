//! LIBSVM text format reader: `<label> <idx>:<val> <idx>:<val> ...`, with
//! 1-based strictly increasing indices.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use super::{SparseDataset, SparseRow};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("feature index {index} exceeds dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

fn malformed(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        msg: msg.into(),
    }
}

fn parse_label(tok: &str, line: usize) -> Result<i8, ParseError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| malformed(line, format!("bad label {tok:?}")))?;
    if v == 1.0 {
        Ok(1)
    } else if v == -1.0 || v == 0.0 {
        Ok(-1)
    } else {
        Err(malformed(line, format!("label {tok:?} is not binary")))
    }
}

/// Parses a LIBSVM stream. `dim` overrides the feature dimension, which
/// otherwise is the largest index seen. Labels `0` are mapped to `-1`.
pub fn parse_libsvm<T: Scalar, R: BufRead>(
    reader: R,
    dim: Option<usize>,
) -> Result<SparseDataset<T>, ParseError> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|source| ParseError::Io {
            path: "<stream>".into(),
            source,
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_label(tokens.next().unwrap_or_default(), lineno)?;

        let mut row = SparseRow::default();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| malformed(lineno, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| malformed(lineno, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(malformed(lineno, "feature indices are 1-based"));
            }
            if let Some(&prev) = row.indices.last() {
                if idx <= prev {
                    return Err(malformed(
                        lineno,
                        format!("index {idx} does not increase after {prev}"),
                    ));
                }
            }
            let val: f64 = val
                .parse()
                .map_err(|_| malformed(lineno, format!("bad value {val:?}")))?;
            if !val.is_finite() {
                return Err(malformed(lineno, format!("non-finite value {val}")));
            }
            row.indices.push(idx);
            row.values.push(lit::<T>(val));
            max_index = max_index.max(idx);
        }
        rows.push(row);
        labels.push(label);
    }

    let d = match dim {
        Some(d) if d < max_index => {
            return Err(ParseError::IndexOutOfRange {
                index: max_index,
                dim: d,
            })
        }
        Some(d) => d,
        None => max_index,
    };
    Ok(SparseDataset::from_parts(d, rows, labels))
}

pub fn read_libsvm_file<T: Scalar>(
    path: impl AsRef<Path>,
    dim: Option<usize>,
) -> Result<SparseDataset<T>, ParseError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_libsvm(BufReader::new(file), dim)
}
