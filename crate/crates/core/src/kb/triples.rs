use std::io::BufRead;

use thiserror::Error;

use super::{Atom, Symbols, Term};

#[derive(Debug, Error)]
pub enum TripleError {
    #[error("line {line}: expected 3 tab-separated columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: column {column} is empty")]
    EmptyField { line: usize, column: usize },
    #[error("line {line}: {source}")]
    Io { line: usize, source: std::io::Error },
}

/// Reads `subject \t pattern \t object` lines into ground facts.
///
/// Patterns are interned as fact predicates, subjects and objects as
/// entities. Blank lines are skipped.
pub fn parse_triple_file<R: BufRead>(reader: R, symbols: &mut Symbols) -> Result<Vec<Atom>, TripleError> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| TripleError::Io { line: line_no, source })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(TripleError::ColumnCount { line: line_no, found: cols.len() });
        }
        if let Some(c) = cols.iter().position(|c| c.trim().is_empty()) {
            return Err(TripleError::EmptyField { line: line_no, column: c + 1 });
        }
        rows.push([cols[0].to_owned(), cols[1].to_owned(), cols[2].to_owned()]);
    }
    Ok(rows
        .into_iter()
        .map(|[s, p, o]| {
            let pred = symbols.fact_predicate(&p);
            Atom::new(pred, Term::Const(symbols.entity(&s)), Term::Const(symbols.entity(&o)))
        })
        .collect())
}
