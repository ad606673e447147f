//! Datalog concrete syntax.
//!
//! ```text
//! clause := atom (":-" atom ("," atom)*)? "." ("#" digits)?   -- "#n" only in templates
//! atom   := name "(" term "," term ")"
//! name   := ident | quoted | "$" ident                         -- "$q" only in templates
//! term   := Variable | constant | quoted
//! ```
//!
//! Identifiers starting with an uppercase letter or `_` are variables.
//! `%` starts a comment that runs to the end of the line.

use std::fmt;

use thiserror::Error;

use super::{Atom, KnowledgeBase, Rule, Symbols, Term, ARITY};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unterminated quoted name")]
    UnterminatedQuote,
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: &'static str, found: String },
    #[error("predicate {pred} has arity {found}, expected 2")]
    Arity { pred: String, found: usize },
    #[error("variable {var} appears in the head but not in the body")]
    UnboundHeadVariable { var: String },
    #[error("fact contains variable {var}")]
    NonGroundFact { var: String },
    #[error("variable {0} used as a predicate")]
    VariablePredicate(String),
    #[error("{0} is only allowed in template files")]
    TemplateSyntax(&'static str),
    #[error("invalid multiplicity {0:?}")]
    Multiplicity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

impl Pos {
    fn error(self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: self.column, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Pinned(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Neck,
    Hash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::Quoted(s) => write!(f, "quoted name {s:?}"),
            Tok::Pinned(s) => write!(f, "${s}"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
            Tok::Dot => f.write_str("'.'"),
            Tok::Neck => f.write_str("':-'"),
            Tok::Hash => f.write_str("'#'"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, column: self.column }
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '%' {
                while let Some(&c) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn next(&mut self) -> Result<(Pos, Tok), ParseError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(&c) = self.chars.peek() else {
            return Ok((pos, Tok::Eof));
        };
        let tok = match c {
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '.' => {
                self.bump();
                Tok::Dot
            }
            '#' => {
                self.bump();
                Tok::Hash
            }
            ':' => {
                self.bump();
                if self.chars.peek() == Some(&'-') {
                    self.bump();
                    Tok::Neck
                } else {
                    return Err(pos.error(ParseErrorKind::UnexpectedChar(':')));
                }
            }
            '$' => {
                self.bump();
                let name = self.ident();
                if name.is_empty() {
                    return Err(pos.error(ParseErrorKind::UnexpectedChar('$')));
                }
                Tok::Pinned(name)
            }
            '\'' | '"' => {
                self.bump();
                Tok::Quoted(self.quoted(c, pos)?)
            }
            c if c.is_alphanumeric() || c == '_' => Tok::Ident(self.ident()),
            c => return Err(pos.error(ParseErrorKind::UnexpectedChar(c))),
        };
        Ok((pos, tok))
    }

    fn quoted(&mut self, delim: char, start: Pos) -> Result<String, ParseError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(start.error(ParseErrorKind::UnterminatedQuote)),
                Some(c) if c == delim => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some(c) => s.push(c),
                    None => return Err(start.error(ParseErrorKind::UnterminatedQuote)),
                },
                Some(c) => s.push(c),
            }
        }
    }
}

fn is_variable_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_uppercase() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum RawTerm {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RawAtom {
    pub pred: String,
    /// `$name` predicate, only produced in template mode.
    pub pinned: bool,
    pub args: [RawTerm; ARITY],
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RawClause {
    pub head: RawAtom,
    pub body: Vec<RawAtom>,
    pub multiplicity: Option<u32>,
    pub pos: Pos,
}

impl RawClause {
    fn check_range_restriction(&self) -> Result<(), ParseError> {
        let head_vars = self.head.args.iter().filter_map(|t| match t {
            RawTerm::Var(v) => Some(v),
            RawTerm::Const(_) => None,
        });
        for v in head_vars {
            if self.body.is_empty() {
                return Err(self
                    .head
                    .pos
                    .error(ParseErrorKind::NonGroundFact { var: v.clone() }));
            }
            let bound = self
                .body
                .iter()
                .any(|b| b.args.iter().any(|t| matches!(t, RawTerm::Var(w) if w == v)));
            if !bound {
                return Err(self
                    .head
                    .pos
                    .error(ParseErrorKind::UnboundHeadVariable { var: v.clone() }));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ClauseMode {
    Program,
    Template,
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(Pos, Tok)>,
    mode: ClauseMode,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, mode: ClauseMode) -> Self {
        Parser { lexer: Lexer::new(text), peeked: None, mode }
    }

    fn peek(&mut self) -> Result<&(Pos, Tok), ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().expect("peeked"))
    }

    fn advance(&mut self) -> Result<(Pos, Tok), ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn expect(&mut self, want: Tok, expected: &'static str) -> Result<Pos, ParseError> {
        let (pos, tok) = self.advance()?;
        if tok == want {
            Ok(pos)
        } else {
            Err(pos.error(ParseErrorKind::Unexpected { expected, found: tok.to_string() }))
        }
    }

    fn at_eof(&mut self) -> Result<bool, ParseError> {
        Ok(self.peek()?.1 == Tok::Eof)
    }

    fn atom(&mut self) -> Result<RawAtom, ParseError> {
        let (pos, tok) = self.advance()?;
        let (pred, pinned) = match tok {
            Tok::Ident(s) if is_variable_name(&s) => {
                return Err(pos.error(ParseErrorKind::VariablePredicate(s)))
            }
            Tok::Ident(s) | Tok::Quoted(s) => (s, false),
            Tok::Pinned(s) => {
                if self.mode != ClauseMode::Template {
                    return Err(pos.error(ParseErrorKind::TemplateSyntax("'$' predicate")));
                }
                (s, true)
            }
            other => {
                return Err(pos.error(ParseErrorKind::Unexpected {
                    expected: "predicate name",
                    found: other.to_string(),
                }))
            }
        };
        self.expect(Tok::LParen, "'('")?;
        let mut args = vec![self.term()?];
        loop {
            let (p, tok) = self.advance()?;
            match tok {
                Tok::Comma => args.push(self.term()?),
                Tok::RParen => break,
                other => {
                    return Err(p.error(ParseErrorKind::Unexpected {
                        expected: "',' or ')'",
                        found: other.to_string(),
                    }))
                }
            }
        }
        let found = args.len();
        let args: [RawTerm; ARITY] = args
            .try_into()
            .map_err(|_| pos.error(ParseErrorKind::Arity { pred: pred.clone(), found }))?;
        Ok(RawAtom { pred, pinned, args, pos })
    }

    fn term(&mut self) -> Result<RawTerm, ParseError> {
        let (pos, tok) = self.advance()?;
        match tok {
            Tok::Ident(s) if is_variable_name(&s) => Ok(RawTerm::Var(s)),
            Tok::Ident(s) | Tok::Quoted(s) => Ok(RawTerm::Const(s)),
            other => Err(pos.error(ParseErrorKind::Unexpected {
                expected: "term",
                found: other.to_string(),
            })),
        }
    }

    fn clause(&mut self) -> Result<RawClause, ParseError> {
        let head = self.atom()?;
        let pos = head.pos;
        let mut body = Vec::new();
        let (p, tok) = self.advance()?;
        match tok {
            Tok::Dot => {}
            Tok::Neck => {
                body.push(self.atom()?);
                loop {
                    let (p, tok) = self.advance()?;
                    match tok {
                        Tok::Comma => body.push(self.atom()?),
                        Tok::Dot => break,
                        other => {
                            return Err(p.error(ParseErrorKind::Unexpected {
                                expected: "',' or '.'",
                                found: other.to_string(),
                            }))
                        }
                    }
                }
            }
            other => {
                return Err(p.error(ParseErrorKind::Unexpected {
                    expected: "':-' or '.'",
                    found: other.to_string(),
                }))
            }
        }
        let mut multiplicity = None;
        if self.peek()?.1 == Tok::Hash {
            let (p, _) = self.advance()?;
            if self.mode != ClauseMode::Template {
                return Err(p.error(ParseErrorKind::TemplateSyntax("'#' multiplicity")));
            }
            let (np, tok) = self.advance()?;
            let n = match tok {
                Tok::Ident(s) => match s.parse::<u32>() {
                    Ok(n) if n >= 1 => n,
                    _ => return Err(np.error(ParseErrorKind::Multiplicity(s))),
                },
                other => return Err(np.error(ParseErrorKind::Multiplicity(other.to_string()))),
            };
            multiplicity = Some(n);
        }
        let clause = RawClause { head, body, multiplicity, pos };
        clause.check_range_restriction()?;
        Ok(clause)
    }
}

pub(crate) fn parse_clauses(text: &str, mode: ClauseMode) -> Result<Vec<RawClause>, ParseError> {
    let mut p = Parser::new(text, mode);
    let mut out = Vec::new();
    while !p.at_eof()? {
        out.push(p.clause()?);
    }
    Ok(out)
}

fn intern_term(symbols: &mut Symbols, t: &RawTerm) -> Term {
    match t {
        RawTerm::Var(v) => Term::Var(symbols.var(v)),
        RawTerm::Const(c) => Term::Const(symbols.entity(c)),
    }
}

pub(crate) fn intern_args(symbols: &mut Symbols, args: &[RawTerm; ARITY]) -> [Term; ARITY] {
    [intern_term(symbols, &args[0]), intern_term(symbols, &args[1])]
}

pub(super) fn extend_kb(kb: &mut KnowledgeBase, text: &str) -> Result<(), ParseError> {
    let clauses = parse_clauses(text, ClauseMode::Program)?;
    for c in clauses {
        if c.body.is_empty() {
            let pred = kb.symbols.fact_predicate(&c.head.pred);
            let args = intern_args(&mut kb.symbols, &c.head.args);
            kb.facts.push(Atom { pred, args });
        } else {
            let atom = |a: &RawAtom, s: &mut Symbols| {
                let pred = s.rule_predicate(&a.pred);
                Atom { pred, args: intern_args(s, &a.args) }
            };
            let head = atom(&c.head, &mut kb.symbols);
            let body = c.body.iter().map(|b| atom(b, &mut kb.symbols)).collect();
            kb.rules.push(Rule { head, body });
        }
    }
    Ok(())
}

/// Parses a Datalog program into a fresh knowledge base.
///
/// Predicates of ground facts are interned as fact predicates; predicates
/// occurring in rules are interned as rule predicates, even when the
/// surface text coincides.
pub fn parse_program(text: &str) -> Result<KnowledgeBase, ParseError> {
    let mut kb = KnowledgeBase::new();
    extend_kb(&mut kb, text)?;
    Ok(kb)
}

/// Parses a single query atom such as `country(athens, X)`; the trailing
/// period is optional. The predicate is interned as a goal predicate.
pub fn parse_goal(text: &str, symbols: &mut Symbols) -> Result<Atom, ParseError> {
    let mut p = Parser::new(text, ClauseMode::Program);
    let raw = p.atom()?;
    if p.peek()?.1 == Tok::Dot {
        p.advance()?;
    }
    let (pos, tok) = p.advance()?;
    if tok != Tok::Eof {
        return Err(pos.error(ParseErrorKind::Unexpected {
            expected: "end of query",
            found: tok.to_string(),
        }));
    }
    let pred = symbols.goal_predicate(&raw.pred);
    Ok(Atom { pred, args: intern_args(symbols, &raw.args) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Domain, SymbolKind};

    #[test]
    fn rule_with_swapped_arguments() {
        let kb = parse_program("country(X,Y) :- born_in(Y,X).").unwrap();
        assert!(kb.facts.is_empty());
        assert_eq!(kb.rules.len(), 1);
        let r = &kb.rules[0];
        assert_eq!(kb.symbols.text(r.head.pred), "country");
        assert_eq!(r.body.len(), 1);
        assert_eq!(kb.symbols.show(r).to_string(), "country(X, Y) :- born_in(Y, X)");
        assert_eq!(kb.symbols.kind(r.body[0].pred), SymbolKind::RulePredicate);
    }

    #[test]
    fn single_ground_fact() {
        let kb = parse_program("born_in(socrates, athens).").unwrap();
        assert_eq!(kb.facts.len(), 1);
        assert!(kb.rules.is_empty());
        let f = kb.facts[0];
        assert!(f.is_ground());
        assert_eq!(kb.symbols.kind(f.pred), SymbolKind::FactPredicate);
        assert_eq!(kb.symbols.len(Domain::Entity), 2);
    }

    #[test]
    fn unary_atom_is_an_arity_error() {
        let err = parse_program("p(X) :- q(X,Y).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Arity { pred: "p".into(), found: 1 });
        assert_eq!((err.line, err.column), (1, 1));
    }

    #[test]
    fn ternary_atom_is_an_arity_error() {
        let err = parse_program("p(a,b).\n  q(a, b, c).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Arity { pred: "q".into(), found: 3 });
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn head_only_variable_is_rejected() {
        let err = parse_program("p(X,Z) :- q(X,Y).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnboundHeadVariable { var: "Z".into() });
    }

    #[test]
    fn non_ground_fact_is_rejected() {
        let err = parse_program("p(X, a).").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonGroundFact { var: "X".into() });
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_program("p(a,b).\np(a b).").unwrap_err();
        assert_eq!((err.line, err.column), (2, 5));
        assert!(matches!(err.kind, ParseErrorKind::Unexpected { .. }));
        let err = parse_program("p(a,b)").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::Unexpected { .. }));
    }

    #[test]
    fn comments_and_quoted_names() {
        let text = "% a comment\n'ENT1 was born in ENT2'(\"Socrates\", 'Athens'). % trailing\n";
        let kb = parse_program(text).unwrap();
        let f = kb.facts[0];
        assert_eq!(kb.symbols.text(f.pred), "ENT1 was born in ENT2");
        assert_eq!(kb.symbols.show(&f.args[0]).to_string(), "'Socrates'");
    }

    #[test]
    fn template_syntax_rejected_in_programs() {
        let err = parse_program("$q(X,Y) :- p(X,Y).").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::TemplateSyntax(_)));
        let err = parse_program("q(X,Y) :- p(X,Y). #2").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::TemplateSyntax(_)));
    }

    #[test]
    fn goal_with_variable() {
        let mut s = Symbols::new();
        let g = parse_goal("country(athens, X)", &mut s).unwrap();
        assert_eq!(s.kind(g.pred), SymbolKind::GoalPredicate);
        assert!(!g.is_ground());
        assert!(parse_goal("country(athens, X). extra", &mut s).is_err());
        assert!(parse_goal("country(athens, X).", &mut s).is_ok());
    }

    #[test]
    fn kb_unchanged_on_error() {
        let mut kb = parse_program("p(a,b).").unwrap();
        assert!(kb.extend_program("q(c,d).\nbad(").is_err());
        assert_eq!(kb.facts.len(), 1);
        assert!(kb.symbols.lookup(Domain::FactPredicate, "q").is_none());
    }
}
