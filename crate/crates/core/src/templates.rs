//! Rule templates and their instantiation with fresh learnable predicates.
//!
//! Templates use the program syntax with two additions: `$q` names the
//! query predicate, and a trailing `#n` asks for `n` copies.
//!
//! ```text
//! $q(X, Y) :- p2(X, Y). #2
//! p1(X, Z) :- p2(X, Y), p3(Y, Z). #2
//! born_in(X, Z) :- born_in(X, Y), located_in(Y, Z).
//! ```
//!
//! Predicate names of the form `p<digits>` are placeholders: every copy
//! replaces each of them with a fresh rule predicate. Any other name is
//! taken literally.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::embed::{stream_rng, ParameterSet};
use crate::kb::{
    parse_clauses, write_name, Atom, ClauseMode, Domain, KnowledgeBase, ParseError, ParseErrorKind, RawAtom, RawTerm,
    Rule, Symbol,
};

const STREAM_TEMPLATES: u64 = 4 << 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplatePred {
    Query,
    Placeholder(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateTerm {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateAtom {
    pub pred: TemplatePred,
    pub args: [TemplateTerm; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTemplate {
    pub head: TemplateAtom,
    pub body: Vec<TemplateAtom>,
    pub multiplicity: u32,
}

fn is_placeholder(name: &str) -> bool {
    name.len() > 1 && name.starts_with('p') && name[1..].chars().all(|c| c.is_ascii_digit())
}

impl TemplateAtom {
    fn from_raw(a: &RawAtom) -> Self {
        let pred = if a.pinned {
            TemplatePred::Query
        } else if is_placeholder(&a.pred) {
            TemplatePred::Placeholder(a.pred.clone())
        } else {
            TemplatePred::Literal(a.pred.clone())
        };
        let term = |t: &RawTerm| match t {
            RawTerm::Var(v) => TemplateTerm::Var(v.clone()),
            RawTerm::Const(c) => TemplateTerm::Const(c.clone()),
        };
        TemplateAtom { pred, args: [term(&a.args[0]), term(&a.args[1])] }
    }
}

impl RuleTemplate {
    /// Distinct placeholders in order of first occurrence.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in std::iter::once(&self.head).chain(&self.body) {
            if let TemplatePred::Placeholder(p) = &a.pred {
                if !out.contains(&p.as_str()) {
                    out.push(p);
                }
            }
        }
        out
    }

    pub fn with_multiplicity(mut self, n: u32) -> Self {
        self.multiplicity = n;
        self
    }
}

struct Name<'a>(&'a str);

impl fmt::Display for Name<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_name(f, self.0)
    }
}

impl fmt::Display for TemplateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.pred {
            TemplatePred::Query => f.write_str("$q")?,
            TemplatePred::Placeholder(p) => f.write_str(p)?,
            TemplatePred::Literal(p) => write!(f, "{}", Name(p))?,
        }
        f.write_str("(")?;
        for (i, t) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match t {
                TemplateTerm::Var(v) => f.write_str(v)?,
                TemplateTerm::Const(c) => write!(f, "{}", Name(c))?,
            }
        }
        f.write_str(")")
    }
}

impl fmt::Display for RuleTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        write!(f, ". #{}", self.multiplicity)
    }
}

/// Parses a template file. Clauses without `#n` get one copy.
pub fn parse_templates(text: &str) -> Result<Vec<RuleTemplate>, ParseError> {
    let clauses = parse_clauses(text, ClauseMode::Template)?;
    let mut out = Vec::with_capacity(clauses.len());
    for c in clauses {
        if c.body.is_empty() {
            return Err(ParseError {
                line: c.pos.line,
                column: c.pos.column,
                kind: ParseErrorKind::Unexpected { expected: "rule template", found: "fact".into() },
            });
        }
        out.push(RuleTemplate {
            head: TemplateAtom::from_raw(&c.head),
            body: c.body.iter().map(TemplateAtom::from_raw).collect(),
            multiplicity: c.multiplicity.unwrap_or(1),
        });
    }
    Ok(out)
}

/// The three standard forms: a paraphrase of the query, an inverse and a
/// two-hop chain, each with `multiplicity` copies.
pub fn default_templates(multiplicity: u32) -> Vec<RuleTemplate> {
    let text = "$q(X, Y) :- p2(X, Y).\n\
                p1(X, Y) :- p2(Y, X).\n\
                p1(X, Z) :- p2(X, Y), p3(Y, Z).\n";
    parse_templates(text)
        .expect("built-in templates parse")
        .into_iter()
        .map(|t| t.with_multiplicity(multiplicity))
        .collect()
}

/// What one call to [`instantiate`] added.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiation {
    /// Indices of the new rules in `KnowledgeBase::rules`.
    pub rules: Range<usize>,
    /// Fresh placeholder symbols, in creation order.
    pub fresh: Vec<Symbol>,
}

fn fresh_name(kb: &KnowledgeBase, q: Symbol, template: usize, copy: u32, placeholder: &str) -> String {
    let mut name = format!("{}_t{}c{}_{}", kb.symbols.text(q), template + 1, copy + 1, placeholder);
    while kb.symbols.lookup(Domain::RuleGoal, &name).is_some() {
        name.push('_');
    }
    name
}

/// Adds every copy of every template to `kb`, specialised to the query
/// predicate `q`, and gives each new rule predicate a random row.
///
/// Rows are drawn from a stream keyed by `seed` and `q`, so the result
/// does not depend on other instantiations.
pub fn instantiate(
    templates: &[RuleTemplate],
    q: Symbol,
    kb: &mut KnowledgeBase,
    params: &mut ParameterSet,
    seed: u64,
) -> Instantiation {
    params.grow_to(&kb.symbols, seed);
    let mut rng = stream_rng(seed, STREAM_TEMPLATES | u64::from(q.id));
    let start = kb.rules.len();
    let mut fresh = Vec::new();
    for (ti, t) in templates.iter().enumerate() {
        for copy in 0..t.multiplicity {
            let mut map: HashMap<&str, Symbol> = HashMap::new();
            for p in t.placeholders() {
                let name = fresh_name(kb, q, ti, copy, p);
                let s = kb.symbols.rule_predicate(&name);
                let row = params.push_rulegoal_row(&mut rng);
                debug_assert_eq!(row, s.id);
                fresh.push(s);
                map.insert(p, s);
            }
            let mut atom = |a: &TemplateAtom| {
                let pred = match &a.pred {
                    TemplatePred::Query => q,
                    TemplatePred::Placeholder(p) => map[p.as_str()],
                    TemplatePred::Literal(p) => kb.symbols.rule_predicate(p),
                };
                let args = a.args.clone().map(|t| match t {
                    TemplateTerm::Var(v) => crate::kb::Term::Var(kb.symbols.var(&v)),
                    TemplateTerm::Const(c) => crate::kb::Term::Const(kb.symbols.entity(&c)),
                });
                Atom { pred, args }
            };
            let head = atom(&t.head);
            let body = t.body.iter().map(&mut atom).collect();
            kb.rules.push(Rule { head, body });
            // Literal predicates and constants may be new as well.
            params.grow_to(&kb.symbols, seed);
        }
    }
    Instantiation { rules: start..kb.rules.len(), fresh }
}
