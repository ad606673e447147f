//! Query/candidate examples, one JSON object per line:
//!
//! ```text
//! {"query_pred": "country", "subject": "socrates", "candidates": ["greece", "italy"], "answer": "greece"}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{Atom, Symbol, Symbols, Term, Var};

/// Query `p(e, X)` with candidate answers for `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub query: Atom,
    pub candidates: Vec<Symbol>,
    pub answer: Symbol,
}

impl TrainingExample {
    pub fn query_var(&self) -> Var {
        self.query.args[1].as_var().expect("query has a variable object")
    }

    /// The query with its variable replaced by `c`.
    pub fn grounded(&self, c: Symbol) -> Atom {
        Atom { pred: self.query.pred, args: [self.query.args[0], Term::Const(c)] }
    }

    pub fn answer_index(&self) -> usize {
        self.candidates.iter().position(|&c| c == self.answer).expect("answer among candidates")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRecord {
    pub query_pred: String,
    pub subject: String,
    pub candidates: Vec<String>,
    pub answer: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: answer {answer:?} is not among the candidates")]
    AnswerNotCandidate { line: usize, answer: String },
    #[error("line {line}: no candidates")]
    NoCandidates { line: usize },
    #[error("line {line}: duplicate candidate {candidate:?}")]
    DuplicateCandidate { line: usize, candidate: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Name of the answer variable in parsed queries.
pub const QUERY_VAR: &str = "X";

fn check(line: usize, r: &ExampleRecord) -> Result<(), DatasetError> {
    if r.candidates.is_empty() {
        return Err(DatasetError::NoCandidates { line });
    }
    for (i, c) in r.candidates.iter().enumerate() {
        if r.candidates[..i].contains(c) {
            return Err(DatasetError::DuplicateCandidate { line, candidate: c.clone() });
        }
    }
    if !r.candidates.contains(&r.answer) {
        return Err(DatasetError::AnswerNotCandidate { line, answer: r.answer.clone() });
    }
    Ok(())
}

/// Reads a dataset. Nothing is interned unless every line is valid.
/// Query predicates become goal predicates; subjects and candidates become
/// entities.
pub fn parse_dataset<R: BufRead>(reader: R, symbols: &mut Symbols) -> Result<Vec<TrainingExample>, DatasetError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ExampleRecord =
            serde_json::from_str(&line).map_err(|source| DatasetError::Json { line: i + 1, source })?;
        check(i + 1, &r)?;
        records.push(r);
    }
    let x = symbols.var(QUERY_VAR);
    Ok(records
        .iter()
        .map(|r| {
            let pred = symbols.goal_predicate(&r.query_pred);
            let subject = symbols.entity(&r.subject);
            TrainingExample {
                query: Atom::new(pred, Term::Const(subject), Term::Var(x)),
                candidates: r.candidates.iter().map(|c| symbols.entity(c)).collect(),
                answer: symbols.entity(&r.answer),
            }
        })
        .collect())
}

pub fn write_dataset<W: Write>(mut w: W, records: &[ExampleRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Domain, SymbolKind};

    const LINE: &str = r#"{"query_pred": "country", "subject": "socrates", "candidates": ["greece", "italy"], "answer": "italy"}"#;

    #[test]
    fn parses_one_example() {
        let mut s = Symbols::new();
        let ex = parse_dataset(format!("{LINE}\n\n").as_bytes(), &mut s).unwrap();
        assert_eq!(ex.len(), 1);
        assert_eq!(s.kind(ex[0].query.pred), SymbolKind::GoalPredicate);
        assert_eq!(ex[0].answer_index(), 1);
        assert_eq!(s.show(&ex[0].query).to_string(), "country(socrates, X)");
        let g = ex[0].grounded(ex[0].candidates[0]);
        assert_eq!(s.show(&g).to_string(), "country(socrates, greece)");
    }

    #[test]
    fn bad_lines_intern_nothing() {
        let mut s = Symbols::new();
        let bad = format!("{LINE}\n{{\"query_pred\": \"c\", \"subject\": \"a\", \"candidates\": [\"b\"], \"answer\": \"z\"}}");
        let err = parse_dataset(bad.as_bytes(), &mut s).unwrap_err();
        assert!(matches!(err, DatasetError::AnswerNotCandidate { line: 2, .. }));
        assert!(s.is_empty(Domain::Entity));
        assert!(matches!(parse_dataset("{".as_bytes(), &mut s), Err(DatasetError::Json { line: 1, .. })));
        let dup = r#"{"query_pred": "c", "subject": "a", "candidates": ["b", "b"], "answer": "b"}"#;
        assert!(matches!(parse_dataset(dup.as_bytes(), &mut s), Err(DatasetError::DuplicateCandidate { .. })));
        let none = r#"{"query_pred": "c", "subject": "a", "candidates": [], "answer": "b"}"#;
        assert!(matches!(parse_dataset(none.as_bytes(), &mut s), Err(DatasetError::NoCandidates { .. })));
    }

    #[test]
    fn write_then_parse() {
        let r: ExampleRecord = serde_json::from_str(LINE).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &[r.clone(), r]).unwrap();
        let mut s = Symbols::new();
        assert_eq!(parse_dataset(buf.as_slice(), &mut s).unwrap().len(), 2);
    }
}
