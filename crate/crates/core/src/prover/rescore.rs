use std::collections::HashMap;

use super::proof::Proof;
use super::Aggregator;
use crate::autodiff::{NodeId, Op, Tape};
use crate::embed::{similarity, MlpKind, ParamSlot, ParameterSet};
use crate::kb::{Domain, Symbol};

/// Records symbol encodings on a tape, reusing one node per symbol.
pub struct ProofEncoder<'a> {
    params: &'a ParameterSet,
    encoded: HashMap<Symbol, NodeId>,
}

impl<'a> ProofEncoder<'a> {
    pub fn new(params: &'a ParameterSet) -> Self {
        ProofEncoder { params, encoded: HashMap::new() }
    }

    pub fn encode(&mut self, tape: &mut Tape, s: Symbol) -> NodeId {
        if let Some(&id) = self.encoded.get(&s) {
            return id;
        }
        let p = self.params;
        let id = match s.domain {
            Domain::Entity => {
                let row = tape.leaf(ParamSlot::EntityRow(s.id), p);
                match p.entity_mlp {
                    Some(_) => tape.mlp(row, MlpKind::Entity, p),
                    None => row,
                }
            }
            Domain::FactPredicate => {
                let row = tape.constant(p.pretrained_table().row(s.id as usize).expect("pretrained row").to_vec());
                tape.mlp(row, MlpKind::FactPredicate, p)
            }
            Domain::RuleGoal => {
                let row = tape.leaf(ParamSlot::RuleGoalRow(s.id), p);
                tape.mlp(row, MlpKind::RuleGoal, p)
            }
        };
        self.encoded.insert(s, id);
        id
    }

    /// Scaled cosine similarity node for two distinct symbols.
    pub fn similarity(&mut self, tape: &mut Tape, a: Symbol, b: Symbol) -> NodeId {
        let ea = self.encode(tape, a);
        let eb = self.encode(tape, b);
        let cos = tape.record(Op::CosineSim, &[ea, eb]).expect("equal dimensions");
        tape.record(Op::ScaleToUnitInterval, &[cos]).expect("scalar")
    }

    /// Replays the proof's soft unification steps and aggregates them.
    pub fn rescore(&mut self, tape: &mut Tape, proof: &Proof, aggregator: Aggregator) -> NodeId {
        let soft: Vec<NodeId> = proof
            .steps()
            .filter(|s| !s.exact)
            .map(|s| self.similarity(tape, s.left, s.right))
            .collect();
        if soft.is_empty() {
            return tape.scalar(1.0);
        }
        let op = match aggregator {
            Aggregator::Product => Op::Product,
            Aggregator::Min => Op::Min,
        };
        tape.record(op, &soft).expect("scalar inputs")
    }
}

/// Records the proof's score as a function of the parameters and returns
/// its root node. Exact-match steps contribute the constant 1.
pub fn rescore_proof(proof: &Proof, params: &ParameterSet, tape: &mut Tape, aggregator: Aggregator) -> NodeId {
    ProofEncoder::new(params).rescore(tape, proof, aggregator)
}

/// The same score computed directly from the encoders, without a tape.
pub fn rescore_proof_plain(proof: &Proof, params: &ParameterSet, aggregator: Aggregator) -> f64 {
    proof
        .steps()
        .filter(|s| !s.exact)
        .fold(1.0, |acc, s| aggregator.combine(acc, similarity(s.left, s.right, params)))
}
