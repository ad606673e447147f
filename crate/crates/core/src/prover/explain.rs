use std::fmt::Write as _;

use super::proof::{Clause, Proof, ProofNode};
use crate::kb::{KnowledgeBase, Rule};

/// Human-readable and Graphviz renderings of a proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub text: String,
    pub dot: String,
}

fn clause_label(kb: &KnowledgeBase, node: &ProofNode) -> String {
    match &node.clause {
        Clause::Fact(i) => format!("fact {}", kb.symbols.show(&kb.facts[*i])),
        Clause::Rule { renamed, .. } => {
            let r: &Rule = renamed;
            format!("rule {}", kb.symbols.show(r))
        }
    }
}

fn steps_label(kb: &KnowledgeBase, node: &ProofNode) -> Vec<String> {
    node.steps
        .iter()
        .map(|s| {
            if s.exact {
                format!("{} = {} (exact)", kb.symbols.show(&s.left), kb.symbols.show(&s.right))
            } else {
                format!("{} ~ {} = {:.6}", kb.symbols.show(&s.left), kb.symbols.show(&s.right), s.score)
            }
        })
        .collect()
}

fn write_text(kb: &KnowledgeBase, node: &ProofNode, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let _ = write!(out, "{pad}{} <= {}", kb.symbols.show(&node.goal), clause_label(kb, node));
    if !node.bindings.is_empty() {
        let _ = write!(out, "  {}", kb.symbols.show(&node.bindings));
    }
    out.push('\n');
    for s in steps_label(kb, node) {
        let _ = writeln!(out, "{pad}    | {s}");
    }
    for c in &node.children {
        write_text(kb, c, indent + 1, out);
    }
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

/// Renders `proof`.
///
/// The text form has one line per resolved goal (`goal <= clause`,
/// followed by the clause's variable bindings), its unification steps
/// indented beneath it, and sub-goals indented one level further. The DOT
/// form has one node per resolved goal with edges to its sub-goals.
pub fn explain(proof: &Proof, kb: &KnowledgeBase) -> Explanation {
    let mut text = format!(
        "proof of {}  score = {:.6}  depth = {}\n",
        kb.symbols.show(&proof.goal),
        proof.score,
        proof.depth
    );
    if !proof.answer.is_empty() {
        let _ = writeln!(text, "answer: {}", kb.symbols.show(&proof.answer));
    }
    write_text(kb, &proof.root, 0, &mut text);

    let mut dot = String::from("digraph proof {\n  node [shape=box];\n");
    let mut next = 0usize;
    fn emit(kb: &KnowledgeBase, node: &ProofNode, next: &mut usize, dot: &mut String) -> usize {
        let id = *next;
        *next += 1;
        let mut label = format!("{}\n{}", kb.symbols.show(&node.goal), clause_label(kb, node));
        for s in steps_label(kb, node) {
            label.push('\n');
            label.push_str(&s);
        }
        let _ = writeln!(dot, "  n{id} [label=\"{}\"];", dot_escape(&label));
        for c in &node.children {
            let child = emit(kb, c, next, dot);
            let _ = writeln!(dot, "  n{id} -> n{child};");
        }
        id
    }
    emit(kb, &proof.root, &mut next, &mut dot);
    let _ = writeln!(dot, "  label=\"score {:.6}\";", proof.score);
    dot.push_str("}\n");
    Explanation { text, dot }
}
