//! Reference implementations for cross-checking the prover.
//!
//! [`datalog_fixpoint`] evaluates a program bottom-up by name, the way a
//! classical Datalog engine would. [`exhaustive_max`] enumerates every
//! weak-unification proof with a fixed threshold and no pruning. Both are
//! written independently of [`crate::prover`] and share none of its code.

use std::collections::{BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::embed::{stream_rng, EncodedSymbols, ExactMatch, Similarity};
use crate::kb::{parse_goal, parse_program, Atom, Domain, KnowledgeBase, Term, Var};
use crate::prover::{prove, Aggregator, ProverConfig};

/// A ground atom by surface names: `[predicate, subject, object]`.
pub type GroundFact = [String; 3];

fn names(kb: &KnowledgeBase, a: &Atom, binding: &HashMap<Var, String>) -> Option<GroundFact> {
    let arg = |t: Term| match t {
        Term::Const(c) => Some(kb.symbols.text(c).to_owned()),
        Term::Var(v) => binding.get(&v).cloned(),
    };
    Some([kb.symbols.text(a.pred).to_owned(), arg(a.args[0])?, arg(a.args[1])?])
}

fn match_body(
    kb: &KnowledgeBase,
    body: &[Atom],
    known: &BTreeSet<GroundFact>,
    binding: &mut HashMap<Var, String>,
    out: &mut Vec<HashMap<Var, String>>,
) {
    let Some((first, rest)) = body.split_first() else {
        out.push(binding.clone());
        return;
    };
    let pred = kb.symbols.text(first.pred);
    for fact in known.iter().filter(|f| f[0] == pred) {
        let mut added = Vec::new();
        let mut ok = true;
        for (t, value) in first.args.iter().zip(&fact[1..]) {
            match *t {
                Term::Const(c) => ok &= kb.symbols.text(c) == value,
                Term::Var(v) => match binding.get(&v) {
                    Some(bound) => ok &= bound == value,
                    None => {
                        binding.insert(v, value.clone());
                        added.push(v);
                    }
                },
            }
        }
        if ok {
            match_body(kb, rest, known, binding, out);
        }
        for v in added {
            binding.remove(&v);
        }
    }
}

/// Ground atoms derivable with at most `depth` nested rule applications:
/// `L0` is the fact set and `Lk = L(k-1) ∪ T(L(k-1))`.
pub fn datalog_fixpoint(kb: &KnowledgeBase, depth: u32) -> BTreeSet<GroundFact> {
    let empty = HashMap::new();
    let mut known: BTreeSet<GroundFact> = kb.facts.iter().filter_map(|f| names(kb, f, &empty)).collect();
    for _ in 0..depth {
        let mut next = known.clone();
        for rule in &kb.rules {
            let mut matches = Vec::new();
            match_body(kb, &rule.body, &known, &mut HashMap::new(), &mut matches);
            next.extend(matches.iter().filter_map(|b| names(kb, &rule.head, b)));
        }
        if next.len() == known.len() {
            break;
        }
        known = next;
    }
    known
}

struct Enumerator<'a, S: ?Sized> {
    kb: &'a KnowledgeBase,
    sim: &'a S,
    aggregator: Aggregator,
    threshold: f64,
    max_depth: u32,
    generation: u32,
    best: Option<f64>,
    proofs: u64,
}

fn resolve(mut t: Term, s: &HashMap<Var, Term>) -> Term {
    while let Term::Var(v) = t {
        match s.get(&v) {
            Some(&next) => t = next,
            None => break,
        }
    }
    t
}

impl<S: Similarity + ?Sized> Enumerator<'_, S> {
    fn unify(&self, goal: &Atom, clause: &Atom, s: &mut HashMap<Var, Term>, score: f64) -> Option<f64> {
        let mut score = self.aggregator.combine(score, self.sim.similarity(goal.pred, clause.pred));
        for (&x, &y) in goal.args.iter().zip(&clause.args) {
            match (resolve(x, s), resolve(y, s)) {
                (a, b) if a == b => {}
                (Term::Var(v), b) => {
                    s.insert(v, b);
                }
                (a, Term::Var(v)) => {
                    s.insert(v, a);
                }
                (Term::Const(a), Term::Const(b)) => score = self.aggregator.combine(score, self.sim.similarity(a, b)),
            }
        }
        (score >= self.threshold).then_some(score)
    }

    fn rename(&mut self, a: &Atom) -> Atom {
        let mut a = *a;
        for t in &mut a.args {
            if let Term::Var(v) = t {
                *t = Term::Var(Var { name: v.name, gen: self.generation });
            }
        }
        a
    }

    fn solve(&mut self, goals: &[(Atom, u32)], s: &HashMap<Var, Term>, score: f64) {
        let Some(((goal, depth), rest)) = goals.split_first() else {
            self.proofs += 1;
            self.best = Some(self.best.map_or(score, |b| b.max(score)));
            return;
        };
        let kb = self.kb;
        for fact in &kb.facts {
            let mut s2 = s.clone();
            if let Some(next) = self.unify(goal, fact, &mut s2, score) {
                self.solve(rest, &s2, next);
            }
        }
        if *depth >= self.max_depth {
            return;
        }
        for rule in &kb.rules {
            self.generation += 1;
            let head = self.rename(&rule.head);
            let body: Vec<Atom> = rule.body.iter().map(|b| self.rename(b)).collect();
            let mut s2 = s.clone();
            if let Some(next) = self.unify(goal, &head, &mut s2, score) {
                let mut goals: Vec<(Atom, u32)> = body.into_iter().map(|b| (b, depth + 1)).collect();
                goals.extend_from_slice(rest);
                self.solve(&goals, &s2, next);
            }
        }
    }
}

/// Maximum proof score over every proof of `goal` that keeps its score at
/// or above `cfg.threshold`, by plain enumeration. Returns the number of
/// proofs alongside.
pub fn exhaustive_max<S: Similarity + ?Sized>(goal: &Atom, kb: &KnowledgeBase, sim: &S, cfg: &ProverConfig) -> (Option<f64>, u64) {
    let mut e = Enumerator {
        kb,
        sim,
        aggregator: cfg.aggregator,
        threshold: cfg.threshold,
        max_depth: cfg.max_depth,
        generation: 0,
        best: None,
        proofs: 0,
    };
    e.solve(&[(*goal, 0)], &HashMap::new(), 1.0);
    (e.best, e.proofs)
}

/// Size limits for random programs.
#[derive(Debug, Clone)]
pub struct ProgramShape {
    pub max_facts: usize,
    pub max_rules: usize,
    pub max_body: usize,
    pub entities: usize,
    pub predicates: usize,
}

impl Default for ProgramShape {
    fn default() -> Self {
        ProgramShape { max_facts: 12, max_rules: 3, max_body: 2, entities: 4, predicates: 3 }
    }
}

const VARS: [&str; 3] = ["X", "Y", "Z"];

/// Random range-restricted Datalog program text.
pub fn random_program<R: Rng>(shape: &ProgramShape, rng: &mut R) -> String {
    let entity = |rng: &mut R| format!("e{}", rng.random_range(0..shape.entities));
    let pred = |rng: &mut R| format!("p{}", rng.random_range(0..shape.predicates));
    let mut out = String::new();
    for _ in 0..rng.random_range(1..=shape.max_facts) {
        let (p, a, b) = (pred(rng), entity(rng), entity(rng));
        out.push_str(&format!("{p}({a}, {b}).\n"));
    }
    for _ in 0..rng.random_range(0..=shape.max_rules) {
        let mut body = Vec::new();
        let mut body_vars = Vec::new();
        for _ in 0..rng.random_range(1..=shape.max_body) {
            let mut args = Vec::new();
            for _ in 0..2 {
                if rng.random_bool(0.15) {
                    args.push(entity(rng));
                } else {
                    let v = *VARS.choose(rng).expect("vars");
                    if !body_vars.contains(&v) {
                        body_vars.push(v);
                    }
                    args.push(v.to_owned());
                }
            }
            body.push(format!("{}({}, {})", pred(rng), args[0], args[1]));
        }
        let head_arg = |rng: &mut R| match body_vars.choose(rng) {
            Some(v) if !rng.random_bool(0.1) => v.to_string(),
            _ => entity(rng),
        };
        let (a, b) = (head_arg(rng), head_arg(rng));
        out.push_str(&format!("{}({a}, {b}) :- {}.\n", pred(rng), body.join(", ")));
    }
    out
}

/// Agreement counts from [`classical_reduction`] or [`pruning_soundness`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Agreement {
    pub instances: usize,
    pub checks: usize,
    pub mismatches: Vec<String>,
}

impl Agreement {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares the prover (exact-match similarity, threshold 1) against
/// [`datalog_fixpoint`] on every ground goal over the program's names.
pub fn classical_reduction(instances: usize, seed: u64) -> Agreement {
    let mut rng = stream_rng(seed, 7);
    let shape = ProgramShape::default();
    let mut report = Agreement { instances, ..Default::default() };
    for i in 0..instances {
        let text = random_program(&shape, &mut rng);
        let depth = rng.random_range(1..=3);
        let mut kb = parse_program(&text).expect("generated program parses");
        let derived = datalog_fixpoint(&kb, depth);
        let cfg = ProverConfig { threshold: 1.0, max_depth: depth, ..Default::default() };
        for p in 0..shape.predicates {
            for a in 0..shape.entities {
                for b in 0..shape.entities {
                    let goal = parse_goal(&format!("p{p}(e{a}, e{b})"), &mut kb.symbols).expect("goal parses");
                    let proved = prove(&goal, &kb, &ExactMatch::new(&kb.symbols), &cfg).best.is_some();
                    let expected = derived.contains(&[format!("p{p}"), format!("e{a}"), format!("e{b}")]);
                    report.checks += 1;
                    if proved != expected {
                        report.mismatches.push(format!(
                            "program {i} (depth {depth}) goal p{p}(e{a}, e{b}): prover {proved}, oracle {expected}\n{text}"
                        ));
                    }
                }
            }
        }
    }
    report
}

/// A random knowledge base with injected encodings and one goal.
pub struct SoftInstance {
    pub kb: KnowledgeBase,
    pub sim: EncodedSymbols,
    pub goal: Atom,
    pub cfg: ProverConfig,
}

/// Random soft instance: low-dimensional encodings so that similarities
/// spread across the threshold, a random aggregator and depth.
pub fn random_soft_instance<R: Rng>(rng: &mut R) -> SoftInstance {
    let shape = ProgramShape::default();
    let text = random_program(&shape, rng);
    let mut kb = parse_program(&text).expect("generated program parses");
    let arg = |rng: &mut R| {
        if rng.random_bool(0.3) {
            "X".to_owned()
        } else {
            format!("e{}", rng.random_range(0..shape.entities))
        }
    };
    // Goal predicates either share a name with program predicates or are
    // new, so goal-to-head matches are sometimes exact.
    let goal_text = format!("{}({}, {})", ["p0", "p1", "p2", "q0"].choose(rng).expect("names"), arg(rng), arg(rng));
    let goal = parse_goal(&goal_text, &mut kb.symbols).expect("goal parses");
    let dim = 3;
    let table = |d: Domain, rng: &mut R| -> Vec<Vec<f64>> {
        (0..kb.symbols.len(d)).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    };
    let entities = table(Domain::Entity, rng);
    let facts = table(Domain::FactPredicate, rng);
    let rulegoal = table(Domain::RuleGoal, rng);
    let cfg = ProverConfig {
        threshold: rng.random_range(0.3..0.7),
        max_depth: rng.random_range(1..=3),
        aggregator: if rng.random_bool(0.5) { Aggregator::Product } else { Aggregator::Min },
        ..Default::default()
    };
    SoftInstance { kb, sim: EncodedSymbols::from_vectors(entities, facts, rulegoal), goal, cfg }
}

/// Checks that the pruned search returns exactly the exhaustive maximum.
pub fn pruning_soundness(instances: usize, seed: u64) -> Agreement {
    let mut rng = stream_rng(seed, 8);
    let mut report = Agreement { instances, ..Default::default() };
    for i in 0..instances {
        let inst = random_soft_instance(&mut rng);
        let (expected, _) = exhaustive_max(&inst.goal, &inst.kb, &inst.sim, &inst.cfg);
        let got = prove(&inst.goal, &inst.kb, &inst.sim, &inst.cfg).best.map(|p| p.score);
        report.checks += 1;
        if got != expected {
            let goal = inst.kb.symbols.show(&inst.goal).to_string();
            report.mismatches.push(format!("instance {i} goal {goal}: prover {got:?}, exhaustive {expected:?}"));
        }
    }
    report
}
