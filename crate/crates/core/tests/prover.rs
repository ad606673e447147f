use std::collections::{HashMap, HashSet};

use weaklog::dataset::{parse_dataset, write_dataset};
use weaklog::embed::{ExactMatch, InitConfig};
use weaklog::kb::{parse_goal, parse_program, KnowledgeBase};
use weaklog::prover::{explain, prove, Clause, ProverConfig};
use weaklog::synthetic::{generate, SyntheticConfig};
use weaklog::templates::default_templates;
use weaklog::train::{prepare, train, TrainConfig};

/// Checks the subset of DOT that `explain` emits and returns the edges.
fn parse_dot(dot: &str) -> Vec<(usize, usize)> {
    let lines: Vec<&str> = dot.lines().collect();
    assert_eq!(lines.first(), Some(&"digraph proof {"));
    assert_eq!(lines.last(), Some(&"}"));
    let mut nodes = HashSet::new();
    let mut edges = Vec::new();
    for line in &lines[1..lines.len() - 1] {
        let line = line.trim();
        if line == "node [shape=box];" {
            continue;
        }
        if let Some(rest) = line.strip_prefix("label=\"") {
            assert!(rest.ends_with("\";"), "{line}");
            continue;
        }
        if let Some((a, b)) = line.strip_suffix(';').and_then(|l| l.split_once(" -> ")) {
            let id = |s: &str| s.strip_prefix('n').and_then(|n| n.parse::<usize>().ok()).expect("node id");
            edges.push((id(a), id(b)));
            continue;
        }
        let (id, label) = line.split_once(" [label=\"").expect("node line");
        let body = label.strip_suffix("\"];").expect("closed label");
        let mut chars = body.chars();
        while let Some(c) = chars.next() {
            match c {
                '\\' => assert!(matches!(chars.next(), Some('"' | '\\' | 'n')), "bad escape in {line}"),
                '"' | '\n' => panic!("unescaped {c:?} in {line}"),
                _ => {}
            }
        }
        assert!(nodes.insert(id.strip_prefix('n').unwrap().parse::<usize>().unwrap()));
    }
    let mut parents: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in &edges {
        assert!(nodes.contains(&a) && nodes.contains(&b));
        assert!(a < b);
        assert!(parents.insert(b, a).is_none(), "node {b} has two parents");
    }
    assert_eq!(parents.len(), nodes.len() - 1, "one root");
    edges
}

#[test]
fn dot_output_is_a_well_formed_tree() {
    let mut kb = parse_program(
        "'said \"hi\" to'(ann, bob). 'back\\\\slash'(bob, cy).\n\
         chain(X, Z) :- 'said \"hi\" to'(X, Y), 'back\\\\slash'(Y, Z).\n\
         top(X, Y) :- chain(X, Y).",
    )
    .unwrap();
    let goal = parse_goal("top(ann, X)", &mut kb.symbols).unwrap();
    let symbols = kb.symbols.clone();
    let proof = prove(&goal, &kb, &ExactMatch::new(&symbols), &ProverConfig::default()).best.expect("provable");
    let e = explain(&proof, &kb);
    let edges = parse_dot(&e.dot);
    assert_eq!(edges.len(), proof.node_count() - 1);
    assert_eq!(proof.node_count(), 4);
    assert!(e.text.contains("answer: {X/cy}"), "{}", e.text);
}

#[test]
fn rule_application_swaps_arguments() {
    let mut kb = parse_program("born_in(socrates, greece).\ncountry(X, Y) :- born_in(Y, X).").unwrap();
    let goal = parse_goal("country(greece, socrates)", &mut kb.symbols).unwrap();
    let symbols = kb.symbols.clone();
    let proof = prove(&goal, &kb, &ExactMatch::new(&symbols), &ProverConfig::default()).best.unwrap();
    assert_eq!(proof.score, 1.0);
    assert_eq!(proof.depth, 1);
    let child = &proof.root.children[0];
    assert_eq!(kb.symbols.show(&child.goal).to_string(), "born_in(socrates, greece)");
    assert!(matches!(child.clause, Clause::Fact(0)));
}

#[test]
fn training_lowers_loss_and_keeps_pretrained_vectors() {
    let task = generate(&SyntheticConfig::default());
    let mut kb = KnowledgeBase::new();
    kb.extend_triples(task.triples_tsv().as_bytes()).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &task.train).unwrap();
    let data = parse_dataset(buf.as_slice(), &mut kb.symbols).unwrap();
    let cfg = TrainConfig { epochs: 10, ..Default::default() };
    let mut params = prepare(&mut kb, &data, &task.vectors, &default_templates(2), &InitConfig::default(), &cfg).unwrap();
    let frozen = params.pretrained_table().clone();
    let log = train(&data, &kb, &mut params, &cfg);
    assert_eq!(log.epochs.len(), 10);
    assert!(log.epochs[9].mean_loss < log.epochs[0].mean_loss, "{:?}", log.epochs);
    assert_eq!(params.pretrained_table(), &frozen);
    let bits = |t: &weaklog::embed::VectorTable| t.rows().flatten().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(params.pretrained_table()), bits(&frozen));
}
