//! Central finite-difference check of tape gradients on random proof
//! rescoring tapes, optionally topped with the entailment loss.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::autodiff::{loss, Tape, DEFAULT_CLAMP};
use crate::embed::{init_parameters, mlp_forward, stream_rng, InitConfig, KeyedVectors, ParamSlot, ParameterSet};
use crate::kb::{parse_goal, parse_program, Domain, Symbol};
use crate::oracle::{random_program, ProgramShape};
use crate::prover::{prove, rescore_proof_plain, Aggregator, Proof, ProofEncoder, ProverConfig};

pub const FD_STEP: f64 = 1e-5;
/// Points this close to a min tie, a ReLU kink or a clamp bound are
/// excluded, since the function is not differentiable there.
pub const KINK_MARGIN: f64 = 1e-6;
/// Gradients smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-3;
pub const MAX_TAPE_NODES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tapes: usize,
    /// Random draws rejected for being non-differentiable or too large.
    pub rejected: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub worst: Option<(ParamSlot, usize)>,
}

struct Case {
    params: ParameterSet,
    proofs: Vec<Proof>,
    aggregator: Aggregator,
    with_loss: bool,
}

impl Case {
    fn plain(&self, params: &ParameterSet) -> f64 {
        let scores: Vec<f64> = self.proofs.iter().map(|p| rescore_proof_plain(p, params, self.aggregator)).collect();
        if !self.with_loss {
            return scores[0];
        }
        let (lo, hi) = DEFAULT_CLAMP;
        let mut joint = scores[0].clamp(lo, hi);
        if let Some(w) = scores.get(1) {
            joint *= 1.0 - w.clamp(lo, hi);
        }
        -joint.ln()
    }

    fn tape(&self) -> (Tape, crate::autodiff::NodeId) {
        let mut tape = Tape::new();
        let mut enc = ProofEncoder::new(&self.params);
        let nodes: Vec<_> = self.proofs.iter().map(|p| enc.rescore(&mut tape, p, self.aggregator)).collect();
        let root = if self.with_loss {
            loss(&mut tape, Some(nodes[0]), nodes.get(1).copied(), DEFAULT_CLAMP).expect("one side present")
        } else {
            nodes[0]
        };
        (tape, root)
    }

    /// True when the computation is differentiable with margin at the
    /// current parameters.
    fn smooth(&self) -> bool {
        let (lo, hi) = DEFAULT_CLAMP;
        for p in &self.proofs {
            let mut soft: Vec<f64> = Vec::new();
            for s in p.steps().filter(|s| !s.exact) {
                for sym in [s.left, s.right] {
                    if !self.relu_clear(sym) {
                        return false;
                    }
                }
                soft.push(crate::embed::similarity(s.left, s.right, &self.params));
            }
            if self.aggregator == Aggregator::Min {
                soft.sort_by(f64::total_cmp);
                if soft.windows(2).next().is_some_and(|w| w[1] - w[0] < KINK_MARGIN) {
                    return false;
                }
            }
            let v = rescore_proof_plain(p, &self.params, self.aggregator);
            if self.with_loss && ((v - lo).abs() < KINK_MARGIN || (v - hi).abs() < KINK_MARGIN) {
                return false;
            }
        }
        true
    }

    fn relu_clear(&self, s: Symbol) -> bool {
        let (Some(row), Some(m)) = (self.params.input_row(s), self.params.encoder_mlp(s.domain)) else {
            return true;
        };
        let (pre, _) = mlp_forward(row, &m.w1, &m.b1, &m.w2, &m.b2);
        pre.iter().all(|z| z.abs() >= KINK_MARGIN)
    }
}

fn random_case<R: Rng>(rng: &mut R) -> Option<Case> {
    let shape = ProgramShape { max_facts: 8, max_rules: 2, ..Default::default() };
    let mut kb = parse_program(&random_program(&shape, rng)).expect("generated program parses");
    let dim = rng.random_range(2..=4);
    let mut kv = KeyedVectors::new(dim);
    for s in kb.symbols.iter(Domain::FactPredicate) {
        let row: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        kv.insert(kb.symbols.text(s), &row);
    }
    let goals: Vec<_> = (0..2)
        .map(|_| {
            let text = format!(
                "{}(e{}, e{})",
                ["p0", "p1", "q0"].choose(rng).expect("names"),
                rng.random_range(0..shape.entities),
                rng.random_range(0..shape.entities)
            );
            parse_goal(&text, &mut kb.symbols).expect("goal parses")
        })
        .collect();
    let init = InitConfig {
        hidden: Some(rng.random_range(2..=4)),
        entity_mlp: rng.random_bool(0.7),
        predicate_similarity: None,
        ..Default::default()
    };
    let mut params = init_parameters(&kb, &kv, &init, rng.random()).ok()?;
    for slot in params.trainable_slots() {
        if let ParamSlot::Mlp(_, _) = slot {
            for x in params.slot_mut(slot).expect("slot") {
                *x += 0.1 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng);
            }
        }
    }
    let aggregator = if rng.random_bool(0.5) { Aggregator::Product } else { Aggregator::Min };
    let cfg = ProverConfig { threshold: 0.2, max_depth: 2, aggregator, ..Default::default() };
    let sim = crate::embed::LazyEncoded::new(&params);
    let proofs: Vec<Proof> = goals
        .iter()
        .filter_map(|g| prove(g, &kb, &sim, &cfg).best)
        .filter(|p| p.steps().any(|s| !s.exact))
        .collect();
    if proofs.is_empty() {
        return None;
    }
    let with_loss = proofs.len() == 2 || rng.random_bool(0.5);
    Some(Case { params, proofs, aggregator, with_loss })
}

/// Runs the check on `tapes` accepted random tapes.
pub fn check_gradients(tapes: usize, seed: u64) -> GradCheckReport {
    let mut rng = stream_rng(seed, 9);
    let mut report = GradCheckReport { tapes: 0, rejected: 0, coordinates: 0, max_rel_error: 0.0, worst: None };
    while report.tapes < tapes {
        let Some(mut case) = random_case(&mut rng) else {
            report.rejected += 1;
            continue;
        };
        let (tape, root) = case.tape();
        if tape.len() > MAX_TAPE_NODES || !case.smooth() {
            report.rejected += 1;
            continue;
        }
        let grads = tape.backward(root);
        report.tapes += 1;
        for slot in tape.leaf_slots().collect::<Vec<_>>() {
            let n = case.params.slot(slot).map_or(0, <[f64]>::len);
            for i in 0..n {
                let analytic = grads.get(slot).map_or(0.0, |g| g[i]);
                let original = case.params.slot(slot).expect("slot")[i];
                case.params.slot_mut(slot).expect("slot")[i] = original + FD_STEP;
                let up = case.plain(&case.params);
                case.params.slot_mut(slot).expect("slot")[i] = original - FD_STEP;
                let down = case.plain(&case.params);
                case.params.slot_mut(slot).expect("slot")[i] = original;
                let numeric = (up - down) / (2.0 * FD_STEP);
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
                report.coordinates += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst = Some((slot, i));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn few_tapes_pass() {
        let r = check_gradients(10, 1);
        assert_eq!(r.tapes, 10);
        assert!(r.coordinates > 0);
        assert!(r.max_rel_error <= 1e-4, "{r:?}");
    }

    #[test]
    fn wrong_gradient_would_be_caught() {
        let mut rng = stream_rng(5, 9);
        let case = loop {
            if let Some(c) = random_case(&mut rng) {
                break c;
            }
        };
        let (tape, root) = case.tape();
        let grads = tape.backward(root);
        let (slot, g) = grads.iter().find(|(_, g)| g.iter().any(|x| x.abs() > 1e-3)).expect("nonzero gradient");
        let i = g.iter().position(|x| x.abs() > 1e-3).unwrap();
        let mut p = case.params.clone();
        let original = p.slot(slot).unwrap()[i];
        p.slot_mut(slot).unwrap()[i] = original + FD_STEP;
        let up = case.plain(&p);
        p.slot_mut(slot).unwrap()[i] = original - FD_STEP;
        let numeric = (up - case.plain(&p)) / (2.0 * FD_STEP);
        assert!((numeric - g[i]).abs() < 1e-6);
        assert!((numeric - 2.0 * g[i]).abs() > 1e-4);
    }
}
