use crate::kb::{Atom, Rule, Substitution, Symbol};

/// One symbol comparison made during unification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnificationStep {
    /// Symbol from the goal side.
    pub left: Symbol,
    /// Symbol from the fact or rule head.
    pub right: Symbol,
    pub score: f64,
    /// Both sides are the same symbol (score exactly 1).
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Clause {
    /// Index into `KnowledgeBase::facts`.
    Fact(usize),
    /// Index into `KnowledgeBase::rules`, with the standardized-apart copy
    /// that was applied.
    Rule { index: usize, renamed: Rule },
}

/// One resolution step: a goal and the clause that resolved it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofNode {
    /// The goal with the final substitution applied.
    pub goal: Atom,
    pub clause: Clause,
    /// Resolved bindings of the clause's variables (empty for facts).
    pub bindings: Substitution,
    pub steps: Vec<UnificationStep>,
    pub children: Vec<ProofNode>,
}

impl ProofNode {
    /// Nested rule applications below and including this node.
    pub fn depth(&self) -> u32 {
        let below = self.children.iter().map(ProofNode::depth).max().unwrap_or(0);
        match self.clause {
            Clause::Fact(_) => below,
            Clause::Rule { .. } => below + 1,
        }
    }

    /// Nodes in pre-order, which is the order the search resolved them.
    pub fn preorder(&self) -> Vec<&ProofNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(n.children.iter().rev());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proof {
    /// The goal as posed, possibly with variables.
    pub goal: Atom,
    /// Bindings of the goal's variables.
    pub answer: Substitution,
    pub root: ProofNode,
    pub score: f64,
    pub depth: u32,
}

impl Proof {
    /// All unification steps in resolution order.
    pub fn steps(&self) -> impl Iterator<Item = &UnificationStep> {
        self.root.preorder().into_iter().flat_map(|n| n.steps.iter())
    }

    pub fn node_count(&self) -> usize {
        self.root.preorder().len()
    }
}
