//! Function-free logic programs: symbols, terms, atoms, rules and the
//! knowledge base that owns their symbol tables.
//!
//! All handle types ([`Symbol`], [`Var`], [`Term`], [`Atom`]) are `Copy`;
//! their surface strings live in [`Symbols`], and rendering goes through
//! [`Symbols::show`].

mod parse;
mod subst;
mod triples;

use std::collections::HashMap;
use std::fmt;

pub use parse::{parse_goal, parse_program, ParseError, ParseErrorKind};
pub(crate) use parse::{parse_clauses, ClauseMode, RawAtom, RawTerm};
pub use subst::{apply_substitution, standardize_apart, FreshVars, Substitution};
pub use triples::{parse_triple_file, TripleError};

/// Number of arguments of every atom.
pub const ARITY: usize = 2;

/// Interning namespace of a symbol.
///
/// Rule and goal predicates share one namespace: a template head pinned to
/// the query predicate must be the very same symbol as the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Entity,
    FactPredicate,
    RuleGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Entity,
    FactPredicate,
    RulePredicate,
    GoalPredicate,
}

impl SymbolKind {
    pub fn domain(self) -> Domain {
        match self {
            SymbolKind::Entity => Domain::Entity,
            SymbolKind::FactPredicate => Domain::FactPredicate,
            SymbolKind::RulePredicate | SymbolKind::GoalPredicate => Domain::RuleGoal,
        }
    }

    pub fn is_predicate(self) -> bool {
        self != SymbolKind::Entity
    }
}

/// Handle to an interned symbol. Ids are dense per [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol {
    pub domain: Domain,
    pub id: u32,
}

impl Symbol {
    pub fn entity(id: u32) -> Self {
        Symbol { domain: Domain::Entity, id }
    }

    pub fn fact_predicate(id: u32) -> Self {
        Symbol { domain: Domain::FactPredicate, id }
    }

    pub fn rule_goal(id: u32) -> Self {
        Symbol { domain: Domain::RuleGoal, id }
    }

    pub fn is_entity(self) -> bool {
        self.domain == Domain::Entity
    }
}

/// A logic variable. `gen` is zero for variables as written and set to a
/// fresh generation number by [`standardize_apart`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: u32,
    pub gen: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Symbol),
}

impl Term {
    pub fn as_var(self) -> Option<Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Symbol,
    pub args: [Term; ARITY],
}

impl Atom {
    pub fn new(pred: Symbol, a: Term, b: Term) -> Self {
        Atom { pred, args: [a, b] }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.args.iter().filter_map(|t| t.as_var())
    }
}

/// Horn clause `head :- body`. A rule with an empty body is a fact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Rule {
    pub fn fact(head: Atom) -> Self {
        Rule { head, body: Vec::new() }
    }

    pub fn body_size(&self) -> usize {
        self.body.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter())
    }

    /// Head variables that do not occur in the body.
    pub fn unbound_head_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for v in self.head.vars() {
            let in_body = self.body.iter().any(|a| a.vars().any(|w| w == v));
            if !in_body && !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// True when the rule satisfies the range-restriction invariant.
    pub fn is_well_formed(&self) -> bool {
        if self.body.is_empty() {
            self.head.is_ground()
        } else {
            self.unbound_head_vars().is_empty()
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub(crate) fn intern(&mut self, text: &str) -> (u32, bool) {
        if let Some(&id) = self.index.get(text) {
            return (id, false);
        }
        let id = self.names.len() as u32;
        self.names.push(text.to_owned());
        self.index.insert(text.to_owned(), id);
        (id, true)
    }

    pub(crate) fn get(&self, text: &str) -> Option<u32> {
        self.index.get(text).copied()
    }

    pub(crate) fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub(crate) fn len(&self) -> usize {
        self.names.len()
    }
}

/// Symbol tables: one interner per [`Domain`] plus variable names.
#[derive(Debug, Clone, Default)]
pub struct Symbols {
    entities: Interner,
    fact_preds: Interner,
    rule_goal: Interner,
    rule_goal_kinds: Vec<SymbolKind>,
    vars: Interner,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, text: &str) -> Symbol {
        Symbol::entity(self.entities.intern(text).0)
    }

    pub fn fact_predicate(&mut self, text: &str) -> Symbol {
        Symbol::fact_predicate(self.fact_preds.intern(text).0)
    }

    /// Interns a predicate used in a rule. An existing rule/goal symbol
    /// with the same text is reused and keeps its original kind.
    pub fn rule_predicate(&mut self, text: &str) -> Symbol {
        self.intern_rule_goal(text, SymbolKind::RulePredicate)
    }

    pub fn goal_predicate(&mut self, text: &str) -> Symbol {
        self.intern_rule_goal(text, SymbolKind::GoalPredicate)
    }

    fn intern_rule_goal(&mut self, text: &str, kind: SymbolKind) -> Symbol {
        let (id, fresh) = self.rule_goal.intern(text);
        if fresh {
            self.rule_goal_kinds.push(kind);
        }
        Symbol::rule_goal(id)
    }

    pub fn var(&mut self, name: &str) -> Var {
        Var { name: self.vars.intern(name).0, gen: 0 }
    }

    pub fn lookup(&self, domain: Domain, text: &str) -> Option<Symbol> {
        self.table(domain).get(text).map(|id| Symbol { domain, id })
    }

    pub fn text(&self, s: Symbol) -> &str {
        self.table(s.domain).name(s.id)
    }

    pub fn kind(&self, s: Symbol) -> SymbolKind {
        match s.domain {
            Domain::Entity => SymbolKind::Entity,
            Domain::FactPredicate => SymbolKind::FactPredicate,
            Domain::RuleGoal => self.rule_goal_kinds[s.id as usize],
        }
    }

    pub fn len(&self, domain: Domain) -> usize {
        self.table(domain).len()
    }

    pub fn is_empty(&self, domain: Domain) -> bool {
        self.len(domain) == 0
    }

    pub fn iter(&self, domain: Domain) -> impl Iterator<Item = Symbol> {
        (0..self.len(domain) as u32).map(move |id| Symbol { domain, id })
    }

    pub fn var_name(&self, v: Var) -> String {
        let base = self.vars.name(v.name);
        if v.gen == 0 {
            base.to_owned()
        } else {
            format!("{base}_{}", v.gen)
        }
    }

    fn table(&self, domain: Domain) -> &Interner {
        match domain {
            Domain::Entity => &self.entities,
            Domain::FactPredicate => &self.fact_preds,
            Domain::RuleGoal => &self.rule_goal,
        }
    }

    /// Displayable view of an atom, term, rule or substitution.
    pub fn show<'a, T: ?Sized>(&'a self, item: &'a T) -> Shown<'a, T> {
        Shown { symbols: self, item }
    }
}

/// Logic program: ground facts plus rules with non-empty bodies.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeBase {
    pub symbols: Symbols,
    pub facts: Vec<Atom>,
    pub rules: Vec<Rule>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `text` and appends its facts and rules.
    pub fn extend_program(&mut self, text: &str) -> Result<(), ParseError> {
        parse::extend_kb(self, text)
    }

    /// Reads a triple TSV stream and appends one fact per line.
    pub fn extend_triples<R: std::io::BufRead>(&mut self, reader: R) -> Result<usize, TripleError> {
        let facts = parse_triple_file(reader, &mut self.symbols)?;
        let n = facts.len();
        self.facts.extend(facts);
        Ok(n)
    }

    pub fn add_rule(&mut self, rule: Rule) {
        if rule.body.is_empty() {
            self.facts.push(rule.head);
        } else {
            self.rules.push(rule);
        }
    }

    /// Renders the program in the concrete syntax accepted by
    /// [`parse_program`].
    pub fn to_program_text(&self) -> String {
        let mut out = String::new();
        for f in &self.facts {
            out.push_str(&format!("{}.\n", self.symbols.show(f)));
        }
        for r in &self.rules {
            out.push_str(&format!("{}.\n", self.symbols.show(r)));
        }
        out
    }
}

pub struct Shown<'a, T: ?Sized> {
    symbols: &'a Symbols,
    item: &'a T,
}

fn needs_quotes(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
        _ => return true,
    }
    !chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn write_name(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    if !needs_quotes(s) {
        return f.write_str(s);
    }
    f.write_str("'")?;
    for c in s.chars() {
        match c {
            '\'' => f.write_str("\\'")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("'")
}

impl fmt::Display for Shown<'_, Term> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self.item {
            Term::Var(v) => f.write_str(&self.symbols.var_name(v)),
            Term::Const(s) => write_name(f, self.symbols.text(s)),
        }
    }
}

impl fmt::Display for Shown<'_, Symbol> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_name(f, self.symbols.text(*self.item))
    }
}

impl fmt::Display for Shown<'_, Atom> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.item;
        write_name(f, self.symbols.text(a.pred))?;
        write!(
            f,
            "({}, {})",
            self.symbols.show(&a.args[0]),
            self.symbols.show(&a.args[1])
        )
    }
}

impl fmt::Display for Shown<'_, Rule> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbols.show(&self.item.head))?;
        for (i, b) in self.item.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{}", self.symbols.show(b))?;
        }
        Ok(())
    }
}

impl fmt::Display for Shown<'_, Substitution> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.item.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}/{}", self.symbols.var_name(*v), self.symbols.show(t))?;
        }
        f.write_str("}")
    }
}
