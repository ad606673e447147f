//! Word2vec-style text vectors: a header line `N d`, then `N` lines of
//! `key v1 ... vd`. Keys are base64 so that patterns may contain spaces.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use thiserror::Error;

/// Components added to an all-zero row so that cosine similarity stays
/// defined.
pub const ZERO_ROW_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum VectorFileError {
    #[error("missing header line")]
    MissingHeader,
    #[error("line 1: malformed header {0:?}, expected `N d`")]
    BadHeader(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    Dimension { line: usize, expected: usize, found: usize },
    #[error("line {line}: invalid number {token:?}")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: key is not valid base64 UTF-8")]
    BadKey { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("header declares {declared} rows, file has {found}")]
    RowCount { declared: usize, found: usize },
    #[error("line {line}: {source}")]
    Io { line: usize, source: std::io::Error },
}

/// Dense row-major table of equal-length vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    data: Vec<f64>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        VectorTable { dim, data: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> Option<&[f64]> {
        self.data.get(i * self.dim..(i + 1) * self.dim)
    }

    pub fn row_mut(&mut self, i: usize) -> Option<&mut [f64]> {
        self.data.get_mut(i * self.dim..(i + 1) * self.dim)
    }

    /// Appends a row, nudging it off zero if necessary. Returns its index.
    pub fn push(&mut self, row: &[f64]) -> usize {
        assert_eq!(row.len(), self.dim, "row length must equal table dimension");
        let start = self.data.len();
        self.data.extend_from_slice(row);
        if row.iter().all(|&x| x == 0.0) {
            for x in &mut self.data[start..] {
                *x = ZERO_ROW_EPSILON;
            }
        }
        self.len() - 1
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }
}

/// Vectors addressed by string key, as read from a vector file.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedVectors {
    keys: Vec<String>,
    index: HashMap<String, usize>,
    table: VectorTable,
}

impl KeyedVectors {
    pub fn new(dim: usize) -> Self {
        KeyedVectors { keys: Vec::new(), index: HashMap::new(), table: VectorTable::new(dim) }
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).and_then(|&i| self.table.row(i))
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    /// Inserts or replaces the vector for `key`.
    pub fn insert(&mut self, key: &str, row: &[f64]) {
        if let Some(&i) = self.index.get(key) {
            self.table.row_mut(i).expect("indexed row").copy_from_slice(row);
        } else {
            let i = self.table.push(row);
            self.keys.push(key.to_owned());
            self.index.insert(key.to_owned(), i);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys.iter().map(String::as_str).zip(self.table.rows())
    }
}

/// Reads a vector file.
pub fn load_pretrained<R: BufRead>(reader: R) -> Result<KeyedVectors, VectorFileError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        None => return Err(VectorFileError::MissingHeader),
        Some(l) => l.map_err(|source| VectorFileError::Io { line: 1, source })?,
    };
    let parts: Vec<&str> = header.split_whitespace().collect();
    let (declared, dim) = match parts.as_slice() {
        [n, d] => match (n.parse::<usize>(), d.parse::<usize>()) {
            (Ok(n), Ok(d)) if d > 0 => (n, d),
            _ => return Err(VectorFileError::BadHeader(header.clone())),
        },
        _ => return Err(VectorFileError::BadHeader(header.clone())),
    };
    let mut out = KeyedVectors::new(dim);
    let mut row = Vec::with_capacity(dim);
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|source| VectorFileError::Io { line: line_no, source })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let raw_key = tokens.next().expect("non-empty line has a token");
        let key = STANDARD
            .decode(raw_key)
            .ok()
            .and_then(|b| String::from_utf8(b).ok())
            .ok_or(VectorFileError::BadKey { line: line_no })?;
        row.clear();
        for tok in tokens {
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(VectorFileError::BadNumber { line: line_no, token: tok.to_owned() }),
            }
        }
        if row.len() != dim {
            return Err(VectorFileError::Dimension { line: line_no, expected: dim, found: row.len() });
        }
        if out.index.contains_key(&key) {
            return Err(VectorFileError::DuplicateKey { line: line_no, key });
        }
        out.insert(&key, &row);
    }
    if out.len() != declared {
        return Err(VectorFileError::RowCount { declared, found: out.len() });
    }
    Ok(out)
}

pub fn encode_key(key: &str) -> String {
    STANDARD.encode(key.as_bytes())
}

/// Writes rows in the format read by [`load_pretrained`]. Values are
/// printed with round-trip precision.
pub fn write_vectors<'a, W, I>(mut w: W, dim: usize, rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let rows: Vec<_> = rows.into_iter().collect();
    writeln!(w, "{} {}", rows.len(), dim)?;
    for (key, row) in rows {
        write!(w, "{}", encode_key(key))?;
        for v in row {
            write!(w, " {v:?}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(rows: &[(&str, &str)], header: &str) -> String {
        let mut s = format!("{header}\n");
        for (k, v) in rows {
            s.push_str(&format!("{} {v}\n", encode_key(k)));
        }
        s
    }

    #[test]
    fn two_rows() {
        let text = file(&[("ENT1 lies in ENT2", "1 0 0"), ("ENT1 is located in ENT2", "0.5 0.5 -1")], "2 3");
        let kv = load_pretrained(text.as_bytes()).unwrap();
        assert_eq!(kv.len(), 2);
        assert_eq!(kv.dim(), 3);
        assert_eq!(kv.get("ENT1 is located in ENT2").unwrap(), &[0.5, 0.5, -1.0]);
    }

    #[test]
    fn short_row_is_a_dimension_error() {
        let text = file(&[("a", "1 2")], "1 3");
        match load_pretrained(text.as_bytes()) {
            Err(VectorFileError::Dimension { line: 2, expected: 3, found: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_is_named() {
        let text = file(&[("ENT1 born ENT2", "1 2"), ("ENT1 born ENT2", "3 4")], "2 2");
        let err = load_pretrained(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("ENT1 born ENT2"), "{err}");
    }

    #[test]
    fn header_and_count_mismatch() {
        assert!(matches!(load_pretrained("x".as_bytes()), Err(VectorFileError::BadHeader(_))));
        assert!(matches!(load_pretrained("".as_bytes()), Err(VectorFileError::MissingHeader)));
        let text = file(&[("a", "1 2")], "2 2");
        assert!(matches!(
            load_pretrained(text.as_bytes()),
            Err(VectorFileError::RowCount { declared: 2, found: 1 })
        ));
    }

    #[test]
    fn zero_rows_are_nudged() {
        let text = file(&[("a", "0 0")], "1 2");
        let kv = load_pretrained(text.as_bytes()).unwrap();
        assert!(kv.get("a").unwrap().iter().all(|&x| x == ZERO_ROW_EPSILON));
    }

    #[test]
    fn write_then_read() {
        let mut kv = KeyedVectors::new(2);
        kv.insert("with space", &[0.1, -2.5e-7]);
        kv.insert("plain", &[1.0 / 3.0, 7.0]);
        let mut buf = Vec::new();
        write_vectors(&mut buf, 2, kv.iter()).unwrap();
        assert_eq!(load_pretrained(&buf[..]).unwrap(), kv);
    }
}
