use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use super::params::ParameterSet;
use crate::kb::{Domain, Symbol, Symbols};

/// Symbol similarity in `[0, 1]` used by weak unification.
pub trait Similarity: Sync {
    fn similarity(&self, a: Symbol, b: Symbol) -> f64;
}

/// Cosine of two vectors, or `None` if either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    (denom > 0.0).then(|| dot / denom)
}

/// `(1 + cos) / 2`, and `0.5` when a vector has zero norm.
pub fn scaled_cosine(a: &[f64], b: &[f64]) -> f64 {
    match cosine(a, b) {
        Some(c) => 0.5 * (1.0 + c),
        None => 0.5,
    }
}

/// Sorts never unify with each other: entities only match entities and
/// predicates only match predicates.
fn comparable(a: Symbol, b: Symbol) -> bool {
    a.is_entity() == b.is_entity()
}

/// Scaled cosine similarity of two symbols under `params`, computed
/// directly from the encoders.
///
/// Identical symbols score exactly 1 and entity/predicate pairs score 0.
/// Symbols without an encoding score 0.
pub fn similarity(a: Symbol, b: Symbol, params: &ParameterSet) -> f64 {
    if a == b {
        return 1.0;
    }
    if !comparable(a, b) {
        return 0.0;
    }
    match (params.encode(a), params.encode(b)) {
        (Some(x), Some(y)) => scaled_cosine(&x, &y),
        _ => 0.0,
    }
}

/// Snapshot of every symbol's encoding, shared read-only by provers.
#[derive(Debug)]
pub struct EncodedSymbols {
    tables: [Vec<Vec<f64>>; 3],
    zero_norm: AtomicU64,
}

fn table_index(d: Domain) -> usize {
    match d {
        Domain::Entity => 0,
        Domain::FactPredicate => 1,
        Domain::RuleGoal => 2,
    }
}

impl EncodedSymbols {
    pub fn new(params: &ParameterSet) -> Self {
        let encode_all = |domain: Domain, n: usize| -> Vec<Vec<f64>> {
            (0..n as u32)
                .map(|id| params.encode(Symbol { domain, id }).expect("row exists"))
                .collect()
        };
        EncodedSymbols {
            tables: [
                encode_all(Domain::Entity, params.entity_table.len()),
                encode_all(Domain::FactPredicate, params.pretrained_table().len()),
                encode_all(Domain::RuleGoal, params.rulegoal_table.len()),
            ],
            zero_norm: AtomicU64::new(0),
        }
    }

    /// Injects encodings directly, indexed by symbol id per domain.
    pub fn from_vectors(entities: Vec<Vec<f64>>, fact_predicates: Vec<Vec<f64>>, rule_goal: Vec<Vec<f64>>) -> Self {
        EncodedSymbols { tables: [entities, fact_predicates, rule_goal], zero_norm: AtomicU64::new(0) }
    }

    pub fn vector(&self, s: Symbol) -> Option<&[f64]> {
        self.tables[table_index(s.domain)].get(s.id as usize).map(Vec::as_slice)
    }

    /// Number of comparisons that hit a zero-norm encoding.
    pub fn zero_norm_warnings(&self) -> u64 {
        self.zero_norm.load(Ordering::Relaxed)
    }

    /// Copy with every encoding multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let tables = self
            .tables
            .clone()
            .map(|t| t.into_iter().map(|v| v.into_iter().map(|x| x * factor).collect()).collect());
        EncodedSymbols { tables, zero_norm: AtomicU64::new(0) }
    }
}

fn encoded_similarity(x: Option<&[f64]>, y: Option<&[f64]>, zero_norm: &AtomicU64) -> f64 {
    let (Some(x), Some(y)) = (x, y) else {
        return 0.0;
    };
    match cosine(x, y) {
        Some(c) => 0.5 * (1.0 + c),
        None => {
            zero_norm.fetch_add(1, Ordering::Relaxed);
            0.5
        }
    }
}

impl Similarity for EncodedSymbols {
    fn similarity(&self, a: Symbol, b: Symbol) -> f64 {
        if a == b {
            return 1.0;
        }
        if !comparable(a, b) {
            return 0.0;
        }
        encoded_similarity(self.vector(a), self.vector(b), &self.zero_norm)
    }
}

/// Encodes symbols on first use and caches the result. Cheaper than
/// [`EncodedSymbols`] when a search touches few symbols.
pub struct LazyEncoded<'a> {
    params: &'a ParameterSet,
    cache: [Vec<OnceLock<Option<Vec<f64>>>>; 3],
    zero_norm: AtomicU64,
}

impl<'a> LazyEncoded<'a> {
    pub fn new(params: &'a ParameterSet) -> Self {
        let slots = |n: usize| (0..n).map(|_| OnceLock::new()).collect();
        LazyEncoded {
            params,
            cache: [
                slots(params.entity_table.len()),
                slots(params.pretrained_table().len()),
                slots(params.rulegoal_table.len()),
            ],
            zero_norm: AtomicU64::new(0),
        }
    }

    pub fn vector(&self, s: Symbol) -> Option<&[f64]> {
        self.cache[table_index(s.domain)]
            .get(s.id as usize)?
            .get_or_init(|| self.params.encode(s))
            .as_deref()
    }

    pub fn zero_norm_warnings(&self) -> u64 {
        self.zero_norm.load(Ordering::Relaxed)
    }
}

impl Similarity for LazyEncoded<'_> {
    fn similarity(&self, a: Symbol, b: Symbol) -> f64 {
        if a == b {
            return 1.0;
        }
        if !comparable(a, b) {
            return 0.0;
        }
        encoded_similarity(self.vector(a), self.vector(b), &self.zero_norm)
    }
}

/// Classical symbol equality: 1 when two symbols of the same sort have
/// the same surface text, else 0. Fact and rule predicates with equal
/// text therefore match.
pub struct ExactMatch<'a> {
    symbols: &'a Symbols,
}

impl<'a> ExactMatch<'a> {
    pub fn new(symbols: &'a Symbols) -> Self {
        ExactMatch { symbols }
    }
}

impl Similarity for ExactMatch<'_> {
    fn similarity(&self, a: Symbol, b: Symbol) -> f64 {
        if a == b || (comparable(a, b) && self.symbols.text(a) == self.symbols.text(b)) {
            1.0
        } else {
            0.0
        }
    }
}

impl<T: Similarity + ?Sized> Similarity for &T {
    fn similarity(&self, a: Symbol, b: Symbol) -> f64 {
        (**self).similarity(a, b)
    }
}
