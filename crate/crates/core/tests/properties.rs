use std::collections::HashMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use weaklog::autodiff::{loss, Tape, DEFAULT_CLAMP};
use weaklog::embed::{init_parameters, EncodedSymbols, InitConfig, KeyedVectors, LazyEncoded, Similarity};
use weaklog::kb::{parse_goal, parse_program, standardize_apart, Domain, FreshVars, KnowledgeBase, Substitution, Symbol, Symbols, Term};
use weaklog::oracle::random_soft_instance;
use weaklog::prover::{prove, Aggregator, Clause, ProofEncoder, ProofNode, ProverConfig};

const PREDICATES: [&str; 5] = ["born_in", "located in", "ENT1 was born in ENT2", "it's", "p"];
const ENTITIES: [&str; 6] = ["socrates", "Athens", "new york", "o'neill", "e1", "_x"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

#[derive(Debug, Clone)]
enum Arg {
    Var(usize),
    Const(usize),
}

fn arg_text(a: &Arg) -> String {
    match a {
        Arg::Var(i) => VARS[*i].to_owned(),
        Arg::Const(i) => quoted(ENTITIES[*i]),
    }
}

fn quoted(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn program_strategy() -> impl Strategy<Value = String> {
    let fact = (0..PREDICATES.len(), 0..ENTITIES.len(), 0..ENTITIES.len())
        .prop_map(|(p, a, b)| format!("{}({}, {}).", quoted(PREDICATES[p]), quoted(ENTITIES[a]), quoted(ENTITIES[b])));
    let arg = prop_oneof![(0..VARS.len()).prop_map(Arg::Var), (0..ENTITIES.len()).prop_map(Arg::Const)];
    let atom = (0..PREDICATES.len(), arg.clone(), arg);
    let rule = (0..PREDICATES.len(), prop::collection::vec(atom, 1..=3), any::<(prop::sample::Index, prop::sample::Index)>())
        .prop_filter_map("body needs a variable", |(head, body, (i, j))| {
            let vars: Vec<usize> = body
                .iter()
                .flat_map(|(_, a, b)| [a, b])
                .filter_map(|t| if let Arg::Var(v) = t { Some(*v) } else { None })
                .collect();
            if vars.is_empty() {
                return None;
            }
            let body: Vec<String> =
                body.iter().map(|(p, a, b)| format!("{}({}, {})", quoted(PREDICATES[*p]), arg_text(a), arg_text(b))).collect();
            Some(format!(
                "{}({}, {}) :- {}.",
                quoted(PREDICATES[head]),
                VARS[*i.get(&vars)],
                VARS[*j.get(&vars)],
                body.join(", ")
            ))
        });
    (prop::collection::vec(fact, 0..8), prop::collection::vec(rule, 0..4)).prop_map(|(f, r)| {
        let mut lines = f;
        lines.extend(r);
        lines.join("\n")
    })
}

/// Structure of a knowledge base with symbols replaced by their text.
fn shape(kb: &KnowledgeBase) -> (Vec<String>, Vec<String>) {
    let facts = kb.facts.iter().map(|f| kb.symbols.show(f).to_string()).collect();
    let rules = kb.rules.iter().map(|r| kb.symbols.show(r).to_string()).collect();
    (facts, rules)
}

fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn check_node(node: &ProofNode, kb: &KnowledgeBase) -> Result<(), TestCaseError> {
    prop_assert!(node.goal.is_ground());
    if let Clause::Fact(i) = node.clause {
        let fact = kb.facts[i];
        let pairs = [(node.goal.pred, fact.pred), (sym(node.goal.args[0]), sym(fact.args[0])), (sym(node.goal.args[1]), sym(fact.args[1]))];
        for (g, f) in pairs {
            prop_assert!(g == f || node.steps.iter().any(|s| s.left == g && s.right == f), "{g:?} vs {f:?} unrecorded");
        }
    }
    for c in &node.children {
        check_node(c, kb)?;
    }
    Ok(())
}

fn sym(t: Term) -> Symbol {
    match t {
        Term::Const(c) => c,
        Term::Var(_) => panic!("ground term expected"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_then_parse_round_trips(text in program_strategy()) {
        let kb = parse_program(&text).unwrap();
        let printed = kb.to_program_text();
        let again = parse_program(&printed).unwrap();
        prop_assert_eq!(shape(&kb), shape(&again));
        prop_assert_eq!(again.to_program_text(), printed);
        for d in [Domain::Entity, Domain::FactPredicate, Domain::RuleGoal] {
            prop_assert_eq!(kb.symbols.len(d), again.symbols.len(d));
        }
    }

    #[test]
    fn resolved_substitution_is_idempotent(
        bindings in prop::collection::vec((0usize..6, prop::option::of(0usize..4)), 0..8),
        atoms in prop::collection::vec((0usize..10, 0usize..10), 1..6),
    ) {
        let mut symbols = Symbols::new();
        let vars: Vec<_> = (0..6).map(|i| symbols.var(&format!("V{i}"))).collect();
        let consts: Vec<_> = (0..4).map(|i| symbols.entity(&format!("c{i}"))).collect();
        let p = symbols.goal_predicate("p");
        // A variable is bound only to a later variable or a constant, so
        // chains are acyclic.
        let mut s = Substitution::new();
        for (v, target) in bindings {
            if s.get(vars[v]).is_some() {
                continue;
            }
            let t = match target {
                Some(c) => Term::Const(consts[c]),
                None if v + 1 < vars.len() => Term::Var(vars[v + 1]),
                None => continue,
            };
            s.bind(vars[v], t);
        }
        let term = |i: usize| if i < 6 { Term::Var(vars[i]) } else { Term::Const(consts[i - 6]) };
        let r = s.resolved();
        for (a, b) in atoms {
            let atom = weaklog::kb::Atom::new(p, term(a), term(b));
            let once = weaklog::kb::apply_substitution(&atom, &r);
            prop_assert_eq!(weaklog::kb::apply_substitution(&once, &r), once);
            prop_assert_eq!(weaklog::kb::apply_substitution(&atom, &s), once);
        }
    }

    #[test]
    fn standardize_apart_is_a_renaming(text in program_strategy(), generations in 1u32..4) {
        let kb = parse_program(&text).unwrap();
        let mut fresh = FreshVars::new();
        for _ in 0..generations {
            for r in &kb.rules {
                let renamed = standardize_apart(r, &mut fresh);
                prop_assert_eq!(renamed.body.len(), r.body.len());
                let mut fwd = HashMap::new();
                let mut back = HashMap::new();
                for (a, b) in r.atoms().zip(renamed.atoms()) {
                    prop_assert_eq!(a.pred, b.pred);
                    for (x, y) in a.args.iter().zip(&b.args) {
                        match (x, y) {
                            (Term::Const(c), Term::Const(d)) => prop_assert_eq!(c, d),
                            (Term::Var(v), Term::Var(w)) => {
                                prop_assert_ne!(v, w);
                                prop_assert_eq!(*fwd.entry(*v).or_insert(*w), *w);
                                prop_assert_eq!(*back.entry(*w).or_insert(*v), *v);
                            }
                            _ => prop_assert!(false, "term kind changed"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn similarity_range_symmetry_reflexivity(seed in any::<u64>(), dim in 1usize..8, scale in 0.01f64..100.0) {
        let sim = EncodedSymbols::from_vectors(random_vectors(4, dim, seed), random_vectors(3, dim, seed ^ 1), random_vectors(3, dim, seed ^ 2));
        let scaled = sim.scaled(scale);
        let mut all: Vec<Symbol> = (0..4).map(Symbol::entity).collect();
        all.extend((0..3).map(Symbol::fact_predicate));
        all.extend((0..3).map(Symbol::rule_goal));
        for &a in &all {
            prop_assert_eq!(sim.similarity(a, a), 1.0);
            for &b in &all {
                let s = sim.similarity(a, b);
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!((s - sim.similarity(b, a)).abs() <= 1e-12);
                prop_assert!((s - scaled.similarity(a, b)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn aggregators_are_monotone_and_bounded(scores in prop::collection::vec(0.0f64..=1.0, 1..10), bump in 0.0f64..=1.0, at in any::<prop::sample::Index>()) {
        let fold = |agg: Aggregator, xs: &[f64]| xs.iter().fold(1.0, |acc, &s| agg.combine(acc, s));
        let prod = fold(Aggregator::Product, &scores);
        let min = fold(Aggregator::Min, &scores);
        prop_assert!(prod <= min);
        prop_assert!(scores.iter().all(|&s| min <= s));
        let mut raised = scores.clone();
        let i = at.index(raised.len());
        raised[i] = (raised[i] + bump).min(1.0);
        for agg in [Aggregator::Product, Aggregator::Min] {
            prop_assert!(fold(agg, &raised) >= fold(agg, &scores));
        }
    }

    #[test]
    fn returned_proofs_respect_score_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_soft_instance(&mut rng);
        let out = prove(&inst.goal, &inst.kb, &inst.sim, &inst.cfg);
        if let Some(p) = out.best {
            prop_assert!(p.score >= inst.cfg.threshold);
            for s in p.steps() {
                prop_assert!(p.score <= s.score);
            }
            prop_assert!(p.depth <= inst.cfg.max_depth);
            check_node(&p.root, &inst.kb)?;
            let grounded = p.answer.apply(&inst.goal);
            prop_assert_eq!(grounded, p.root.goal);
        }
    }
}

#[test]
fn gradients_are_bitwise_deterministic() {
    let mut kb = parse_program(
        "born_in(socrates, athens). located_in(athens, greece).\n\
         country(X, Z) :- lives_in(X, Y), located_in(Y, Z).",
    )
    .unwrap();
    let goal = parse_goal("country(socrates, greece)", &mut kb.symbols).unwrap();
    let mut kv = KeyedVectors::new(4);
    kv.insert("born_in", &[1.0, 0.2, 0.0, -0.3]);
    kv.insert("located_in", &[0.0, 1.0, 0.5, 0.1]);
    let params = init_parameters(&kb, &kv, &InitConfig::default(), 2).unwrap();
    let cfg = ProverConfig { threshold: 0.1, ..Default::default() };
    let proof = prove(&goal, &kb, &LazyEncoded::new(&params), &cfg).best.expect("soft proof");
    let grads = || {
        let mut tape = Tape::new();
        let mut enc = ProofEncoder::new(&params);
        let p = enc.rescore(&mut tape, &proof, cfg.aggregator);
        let root = loss(&mut tape, Some(p), None, DEFAULT_CLAMP).unwrap();
        let g = tape.backward(root);
        g.iter().map(|(s, v)| (s, v.iter().map(|x| x.to_bits()).collect::<Vec<_>>())).collect::<Vec<_>>()
    };
    let first = grads();
    assert!(!first.is_empty());
    assert_eq!(first, grads());
}
