use std::collections::HashMap;

use super::proof::{Clause, Proof, ProofNode, UnificationStep};
use super::unify::Unifier;
use super::ProverConfig;
use crate::embed::Similarity;
use crate::kb::{standardize_apart, Atom, Domain, FreshVars, KnowledgeBase, Rule, Substitution, Symbol, Term};

/// Result of a proof search for one goal.
#[derive(Debug, Clone)]
pub struct ProveOutcome {
    /// Highest-scoring proof; the first one found among equal scores.
    pub best: Option<Proof>,
    /// Proofs completed during the search, including ones later beaten.
    pub proofs_found: u64,
}

impl ProveOutcome {
    /// Maximum proof score, or 0 when nothing was proved.
    pub fn score(&self) -> f64 {
        self.best.as_ref().map_or(0.0, |p| p.score)
    }
}

#[derive(Debug, Clone)]
enum EventClause {
    Fact(usize),
    Rule(usize, Rule),
}

#[derive(Debug, Clone)]
struct Event {
    goal: Atom,
    parent: Option<usize>,
    clause: EventClause,
    steps: Vec<UnificationStep>,
}

#[derive(Debug, Clone, Copy)]
struct PendingGoal {
    atom: Atom,
    depth: u32,
    parent: Option<usize>,
}

struct Search<'a, S: ?Sized> {
    kb: &'a KnowledgeBase,
    cfg: &'a ProverConfig,
    unifier: Unifier<'a, S>,
    fresh: FreshVars,
    subst: Substitution,
    events: Vec<Event>,
    best: Option<(f64, Vec<Event>, Substitution)>,
    found: u64,
    stop: bool,
    pred_scores: ScoreRows,
    entity_scores: ScoreRows,
    /// Distinct fact predicates and rule head predicates.
    clause_preds: (Vec<Symbol>, Vec<Symbol>),
    bounds: HashMap<(Symbol, bool), f64>,
}

/// Memoized similarities from a left symbol to every symbol of one domain,
/// stored as flat rows so lookups avoid hashing.
struct ScoreRows {
    width: usize,
    slots: [Vec<u32>; 3],
    rows: Vec<f64>,
}

impl ScoreRows {
    fn new(width: usize, kb: &KnowledgeBase) -> Self {
        let slots = [Domain::Entity, Domain::FactPredicate, Domain::RuleGoal]
            .map(|d| vec![u32::MAX; kb.symbols.len(d)]);
        ScoreRows { width, slots, rows: Vec::new() }
    }

    fn slot(d: Domain) -> usize {
        match d {
            Domain::Entity => 0,
            Domain::FactPredicate => 1,
            Domain::RuleGoal => 2,
        }
    }

    /// Offset of the row for `a`, allocated on first use.
    fn row(&mut self, a: Symbol) -> Option<usize> {
        let slot = self.slots[Self::slot(a.domain)].get_mut(a.id as usize)?;
        if *slot == u32::MAX {
            *slot = (self.rows.len() / self.width.max(1)) as u32;
            self.rows.resize(self.rows.len() + self.width, f64::NAN);
        }
        Some(*slot as usize * self.width)
    }

    fn score<S: Similarity + ?Sized>(&mut self, row: Option<usize>, a: Symbol, b: Symbol, sim: &S) -> f64 {
        let Some(at) = row.filter(|_| (b.id as usize) < self.width).map(|r| r + b.id as usize) else {
            return sim.similarity(a, b);
        };
        let cached = self.rows[at];
        if cached.is_nan() {
            let s = sim.similarity(a, b);
            self.rows[at] = s;
            s
        } else {
            cached
        }
    }
}

impl<S: Similarity + ?Sized> Search<'_, S> {
    /// Necessary condition for `goal` to unify with `head`: the predicate
    /// and every pair of constant arguments pass, with scores combined as
    /// unification would combine them. Skips most failing clauses without
    /// touching the substitution.
    fn may_unify(
        &mut self,
        pred_score: f64,
        goal_args: &[Term; 2],
        rows: [Option<usize>; 2],
        head: &Atom,
        score: f64,
    ) -> bool {
        let (agg, lambda) = (self.unifier.aggregator, self.unifier.threshold);
        if pred_score < lambda {
            return false;
        }
        let mut s = agg.combine(score, pred_score);
        for ((g, h), row) in goal_args.iter().zip(&head.args).zip(rows) {
            if s < lambda {
                return false;
            }
            if let (Term::Const(a), Term::Const(b)) = (*g, *h) {
                if a != b {
                    let sim = self.entity_scores.score(row, a, b, self.unifier.sim);
                    if sim < lambda {
                        return false;
                    }
                    s = agg.combine(s, sim);
                }
            }
        }
        s >= lambda
    }

    /// Upper bound on the factor that proving `g` can contribute: the best
    /// predicate match among the clauses it may use.
    fn bound(&mut self, g: &PendingGoal) -> f64 {
        let rules = g.depth < self.cfg.max_depth;
        if let Some(b) = self.bounds.get(&(g.atom.pred, rules)) {
            return *b;
        }
        let (facts, heads) = &self.clause_preds;
        let heads = if rules { heads.as_slice() } else { &[] };
        let b = facts.iter().chain(heads).map(|&p| self.unifier.sim.similarity(g.atom.pred, p)).fold(0.0, f64::max);
        self.bounds.insert((g.atom.pred, rules), b);
        b
    }

    fn solve(&mut self, goals: &mut Vec<PendingGoal>, score: f64) {
        let mut reachable = score;
        for g in goals.iter() {
            let b = self.bound(g);
            reachable = self.unifier.aggregator.combine(reachable, b);
        }
        if reachable < self.unifier.threshold {
            return;
        }
        let Some(goal) = goals.pop() else {
            self.record(score);
            return;
        };
        let kb = self.kb;
        let goal_args = [self.subst.walk(goal.atom.args[0]), self.subst.walk(goal.atom.args[1])];
        let rows = goal_args.map(|t| match t {
            Term::Const(a) => self.entity_scores.row(a),
            Term::Var(_) => None,
        });
        let pred_row = self.pred_scores.row(goal.atom.pred);
        for (i, fact) in kb.facts.iter().enumerate() {
            if self.stop {
                break;
            }
            let pred_score = self.pred_scores.score(pred_row, goal.atom.pred, fact.pred, self.unifier.sim);
            if !self.may_unify(pred_score, &goal_args, rows, fact, score) {
                continue;
            }
            let mark = self.subst.len();
            let mut steps = Vec::new();
            if let Some(s) = self.unifier.atoms(&goal.atom, fact, &mut self.subst, score, &mut steps) {
                self.events.push(Event { goal: goal.atom, parent: goal.parent, clause: EventClause::Fact(i), steps });
                self.solve(goals, s);
                self.events.pop();
            }
            self.subst.truncate(mark);
        }
        if goal.depth < self.cfg.max_depth {
            for (i, rule) in kb.rules.iter().enumerate() {
                if self.stop {
                    break;
                }
                let pred_score = self.unifier.sim.similarity(goal.atom.pred, rule.head.pred);
                if !self.may_unify(pred_score, &goal_args, rows, &rule.head, score) {
                    continue;
                }
                let renamed = standardize_apart(rule, &mut self.fresh);
                let mark = self.subst.len();
                let mut steps = Vec::new();
                if let Some(s) = self.unifier.atoms(&goal.atom, &renamed.head, &mut self.subst, score, &mut steps) {
                    let event = self.events.len();
                    let n = goals.len();
                    goals.extend(renamed.body.iter().rev().map(|b| PendingGoal {
                        atom: *b,
                        depth: goal.depth + 1,
                        parent: Some(event),
                    }));
                    self.events.push(Event {
                        goal: goal.atom,
                        parent: goal.parent,
                        clause: EventClause::Rule(i, renamed),
                        steps,
                    });
                    self.solve(goals, s);
                    self.events.pop();
                    goals.truncate(n);
                }
                self.subst.truncate(mark);
            }
        }
        goals.push(goal);
    }

    fn record(&mut self, score: f64) {
        self.found += 1;
        if self.best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            self.best = Some((score, self.events.clone(), self.subst.clone()));
        }
        if self.cfg.dynamic_threshold {
            self.unifier.threshold = self.unifier.threshold.max(score);
            // Nothing can beat a perfect score.
            if score >= 1.0 {
                self.stop = true;
            }
        }
        if self.cfg.max_proofs.is_some_and(|m| self.found >= m) {
            self.stop = true;
        }
    }
}


fn clause_preds(kb: &KnowledgeBase) -> (Vec<Symbol>, Vec<Symbol>) {
    let mut facts: Vec<Symbol> = kb.facts.iter().map(|f| f.pred).collect();
    let mut heads: Vec<Symbol> = kb.rules.iter().map(|r| r.head.pred).collect();
    for v in [&mut facts, &mut heads] {
        v.sort();
        v.dedup();
    }
    (facts, heads)
}

fn build_tree(events: &[Event], subst: &Substitution) -> ProofNode {
    fn node(i: usize, events: &[Event], subst: &Substitution) -> ProofNode {
        let e = &events[i];
        let children =
            (i + 1..events.len()).filter(|&j| events[j].parent == Some(i)).map(|j| node(j, events, subst)).collect();
        let (clause, bindings) = match &e.clause {
            EventClause::Fact(f) => (Clause::Fact(*f), Substitution::new()),
            EventClause::Rule(r, renamed) => {
                let vars = renamed.atoms().flat_map(|a| a.vars().collect::<Vec<_>>());
                (Clause::Rule { index: *r, renamed: renamed.clone() }, subst.restricted(vars))
            }
        };
        ProofNode { goal: subst.apply(&e.goal), clause, bindings, steps: e.steps.clone(), children }
    }
    node(0, events, subst)
}

/// Depth-first backward chaining for `goal`.
///
/// Facts are tried before rules, each in knowledge-base order. A proof is
/// accepted when its score reaches the threshold; with
/// `dynamic_threshold` the threshold then rises to that score.
pub fn prove<S: Similarity + ?Sized>(goal: &Atom, kb: &KnowledgeBase, sim: &S, cfg: &ProverConfig) -> ProveOutcome {
    let mut search = Search {
        kb,
        cfg,
        unifier: Unifier { sim, aggregator: cfg.aggregator, threshold: cfg.threshold },
        fresh: FreshVars::new(),
        subst: Substitution::new(),
        events: Vec::new(),
        best: None,
        found: 0,
        stop: false,
        clause_preds: clause_preds(kb),
        bounds: HashMap::new(),
        pred_scores: ScoreRows::new(kb.symbols.len(Domain::FactPredicate), kb),
        entity_scores: ScoreRows::new(kb.symbols.len(Domain::Entity), kb),
    };
    let mut goals = vec![PendingGoal { atom: *goal, depth: 0, parent: None }];
    search.solve(&mut goals, 1.0);
    let best = search.best.map(|(score, events, subst)| {
        let root = build_tree(&events, &subst);
        Proof { goal: *goal, answer: subst.restricted(goal.vars()), depth: root.depth(), root, score }
    });
    ProveOutcome { best, proofs_found: search.found }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::ExactMatch;
    use crate::kb::{parse_goal, parse_program};
    use crate::prover::Aggregator;

    #[test]
    fn exact_fact() {
        let mut kb = parse_program("born_in(socrates, athens).").unwrap();
        let goal = parse_goal("born_in(socrates, athens)", &mut kb.symbols).unwrap();
        let out = prove(&goal, &kb, &ExactMatch::new(&kb.symbols), &ProverConfig::default());
        let p = out.best.unwrap();
        assert_eq!(p.score, 1.0);
        assert_eq!(p.node_count(), 1);
        assert_eq!(p.depth, 0);
    }

    #[test]
    fn rule_yields_subgoal() {
        let mut kb = parse_program("born_in(socrates, athens).\ncountry(X,Y) :- born_in(Y,X).").unwrap();
        let goal = parse_goal("country(athens, socrates)", &mut kb.symbols).unwrap();
        let out = prove(&goal, &kb, &ExactMatch::new(&kb.symbols), &ProverConfig::default());
        let p = out.best.unwrap();
        assert_eq!(p.score, 1.0);
        assert_eq!(p.depth, 1);
        assert_eq!(p.root.children.len(), 1);
        let sub = &p.root.children[0];
        assert_eq!(kb.symbols.show(&sub.goal).to_string(), "born_in(socrates, athens)");
        assert_eq!(sub.clause, Clause::Fact(0));
    }

    #[test]
    fn variable_goal_gets_answer() {
        let mut kb = parse_program("born_in(socrates, athens).\ncountry(X,Y) :- born_in(Y,X).").unwrap();
        let goal = parse_goal("country(athens, X)", &mut kb.symbols).unwrap();
        let out = prove(&goal, &kb, &ExactMatch::new(&kb.symbols), &ProverConfig::default());
        let p = out.best.unwrap();
        assert_eq!(kb.symbols.show(&p.answer).to_string(), "{X/socrates}");
    }

    #[test]
    fn depth_bounds_recursion() {
        let mut kb = parse_program("e(a,b). e(b,c). e(c,d). e(d,f).\np(X,Y) :- e(X,Y).\np(X,Z) :- e(X,Y), p(Y,Z).")
            .unwrap();
        let goal = parse_goal("p(a, f)", &mut kb.symbols).unwrap();
        let sim = ExactMatch::new(&kb.symbols);
        let cfg = |d| ProverConfig { max_depth: d, ..Default::default() };
        assert!(prove(&goal, &kb, &sim, &cfg(3)).best.is_none());
        let p = prove(&goal, &kb, &sim, &cfg(4)).best.unwrap();
        assert_eq!(p.depth, 4);
    }

    #[test]
    fn cyclic_rules_terminate() {
        let mut kb = parse_program("p(X,Y) :- q(X,Y).\nq(X,Y) :- p(X,Y).").unwrap();
        let goal = parse_goal("p(a, b)", &mut kb.symbols).unwrap();
        let out = prove(&goal, &kb, &ExactMatch::new(&kb.symbols), &ProverConfig::default());
        assert!(out.best.is_none());
        assert_eq!(out.proofs_found, 0);
    }

    #[test]
    fn max_proofs_caps_search() {
        let mut kb = parse_program("e(a,b). e(a,c). e(a,d).").unwrap();
        let goal = parse_goal("e(a, X)", &mut kb.symbols).unwrap();
        let sim = ExactMatch::new(&kb.symbols);
        let cfg = ProverConfig { max_proofs: Some(2), dynamic_threshold: false, ..Default::default() };
        assert_eq!(prove(&goal, &kb, &sim, &cfg).proofs_found, 2);
        let cfg = ProverConfig { dynamic_threshold: false, ..Default::default() };
        assert_eq!(prove(&goal, &kb, &sim, &cfg).proofs_found, 3);
    }

    #[test]
    fn min_aggregator_runs() {
        let mut kb = parse_program("e(a,b).").unwrap();
        let goal = parse_goal("e(a, b)", &mut kb.symbols).unwrap();
        let cfg = ProverConfig { aggregator: Aggregator::Min, ..Default::default() };
        assert_eq!(prove(&goal, &kb, &ExactMatch::new(&kb.symbols), &cfg).score(), 1.0);
    }
}
