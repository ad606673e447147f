//! Learning from entailment: candidate scoring, the training loop and
//! evaluation.
//!
//! Each training step searches for the best proof of every candidate with
//! the current parameters, then rescores the answer's best proof and the
//! best wrong candidate's best proof on a tape and takes one gradient step
//! on `-log p(answer) - log(1 - p(best wrong))`.

use std::borrow::Cow;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{adam_step, loss, AdamConfig, Gradients, OptimizerState, Tape, DEFAULT_CLAMP};
use crate::dataset::TrainingExample;
use crate::embed::{init_parameters, stream_rng, InitConfig, InitError, KeyedVectors, LazyEncoded, ParameterSet, Similarity};
use crate::kb::{KnowledgeBase, Symbol};
use crate::prover::{prove, Proof, ProofEncoder, ProveOutcome, ProverConfig};
use crate::templates::{instantiate, RuleTemplate};

const STREAM_SHUFFLE: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u32,
    pub seed: u64,
    /// Train without rule templates; only facts can prove a query.
    pub no_rules: bool,
    /// Use raw entity rows instead of an MLP on top of them.
    pub no_entity_mlp: bool,
    pub prover: ProverConfig,
    /// Probabilities are clamped to this range before taking logs.
    pub clamp: [f64; 2],
    pub adam: AdamConfig,
    /// Examples per parameter update; gradients are averaged.
    pub batch_size: usize,
    /// Threads for candidate scoring.
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            seed: 0,
            no_rules: false,
            no_entity_mlp: false,
            prover: ProverConfig::default(),
            clamp: [DEFAULT_CLAMP.0, DEFAULT_CLAMP.1],
            adam: AdamConfig::default(),
            batch_size: 1,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: u32,
    /// Mean loss over the examples that were not skipped.
    pub mean_loss: f64,
    /// Accuracy of the predictions made before each example's update.
    pub train_accuracy: f64,
    /// Examples where no candidate had a proof.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub updates: u64,
    pub non_finite_skips: u64,
    pub zero_norm_warnings: u64,
}

/// Initialises parameters for `kb` and, unless rules are ablated,
/// instantiates `templates` once for every distinct query predicate in
/// `dataset`. Dataset symbols must already be interned in `kb`.
pub fn prepare(
    kb: &mut KnowledgeBase,
    dataset: &[TrainingExample],
    pretrained: &KeyedVectors,
    templates: &[RuleTemplate],
    init: &InitConfig,
    cfg: &TrainConfig,
) -> Result<ParameterSet, InitError> {
    let init = InitConfig { entity_mlp: init.entity_mlp && !cfg.no_entity_mlp, ..init.clone() };
    let mut params = init_parameters(kb, pretrained, &init, cfg.seed)?;
    if !cfg.no_rules {
        let mut seen: Vec<Symbol> = Vec::new();
        for ex in dataset {
            if !seen.contains(&ex.query.pred) {
                seen.push(ex.query.pred);
                instantiate(templates, ex.query.pred, kb, &mut params, cfg.seed);
            }
        }
    }
    Ok(params)
}

fn search_kb(kb: &KnowledgeBase, no_rules: bool) -> Cow<'_, KnowledgeBase> {
    if no_rules && !kb.rules.is_empty() {
        Cow::Owned(KnowledgeBase { symbols: kb.symbols.clone(), facts: kb.facts.clone(), rules: Vec::new() })
    } else {
        Cow::Borrowed(kb)
    }
}

/// Best proof of `ex`'s query with its variable bound to `c`.
pub fn prove_candidate<S: Similarity + ?Sized>(
    ex: &TrainingExample,
    c: Symbol,
    kb: &KnowledgeBase,
    sim: &S,
    cfg: &ProverConfig,
) -> ProveOutcome {
    prove(&ex.grounded(c), kb, sim, cfg)
}

/// `p(c)`: the maximum proof score of the grounded query, 0 without a
/// proof.
pub fn score_candidate(
    ex: &TrainingExample,
    c: Symbol,
    kb: &KnowledgeBase,
    params: &ParameterSet,
    cfg: &ProverConfig,
) -> f64 {
    prove_candidate(ex, c, kb, &LazyEncoded::new(params), cfg).score()
}

fn prove_all<S: Similarity + ?Sized>(
    ex: &TrainingExample,
    kb: &KnowledgeBase,
    sim: &S,
    cfg: &ProverConfig,
    parallel: bool,
) -> Vec<ProveOutcome> {
    if parallel {
        ex.candidates.par_iter().map(|&c| prove_candidate(ex, c, kb, sim, cfg)).collect()
    } else {
        ex.candidates.iter().map(|&c| prove_candidate(ex, c, kb, sim, cfg)).collect()
    }
}

/// Index of the highest score; the first one wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn pool(jobs: usize) -> Option<rayon::ThreadPool> {
    (jobs > 1).then(|| rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool"))
}

fn with_pool<T: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce(bool) -> T + Send) -> T {
    match pool {
        Some(p) => p.install(|| f(true)),
        None => f(false),
    }
}

/// Best wrong candidate's proof: the highest-scoring non-answer candidate
/// with a proof, first in input order among ties.
fn best_wrong<'a>(ex: &TrainingExample, outcomes: &'a [ProveOutcome]) -> Option<&'a Proof> {
    let answer = ex.answer_index();
    let mut best: Option<&Proof> = None;
    for (i, o) in outcomes.iter().enumerate() {
        if i == answer {
            continue;
        }
        if let Some(p) = &o.best {
            if best.is_none_or(|b| p.score > b.score) {
                best = Some(p);
            }
        }
    }
    best
}

/// Loss and gradients for one example given its searched proofs, or
/// `None` when no candidate has a proof.
pub fn example_gradients(
    ex: &TrainingExample,
    outcomes: &[ProveOutcome],
    params: &ParameterSet,
    cfg: &TrainConfig,
) -> Option<(f64, Gradients)> {
    let answer = outcomes[ex.answer_index()].best.as_ref();
    let wrong = best_wrong(ex, outcomes);
    if answer.is_none() && wrong.is_none() {
        return None;
    }
    let mut tape = Tape::new();
    let mut enc = ProofEncoder::new(params);
    let aggregator = cfg.prover.aggregator;
    let pa = answer.map(|p| enc.rescore(&mut tape, p, aggregator));
    let pw = wrong.map(|p| enc.rescore(&mut tape, p, aggregator));
    let root = loss(&mut tape, pa, pw, (cfg.clamp[0], cfg.clamp[1]))?;
    Some((tape.scalar_value(root), tape.backward(root)))
}

/// Trains `params` in place and returns the per-epoch log.
pub fn train(dataset: &[TrainingExample], kb: &KnowledgeBase, params: &mut ParameterSet, cfg: &TrainConfig) -> TrainLog {
    let kb = search_kb(kb, cfg.no_rules);
    let pool = pool(cfg.jobs);
    let mut state = OptimizerState::new(cfg.adam);
    let mut rng = stream_rng(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let batch = cfg.batch_size.max(1);
    let mut log = TrainLog::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut counted, mut correct, mut skipped) = (0.0, 0usize, 0usize, 0usize);
        let mut grads = Gradients::new();
        let mut pending = 0usize;
        for (n, &i) in order.iter().enumerate() {
            let ex = &dataset[i];
            let sim = LazyEncoded::new(params);
            let outcomes = with_pool(&pool, |par| prove_all(ex, &kb, &sim, &cfg.prover, par));
            log.zero_norm_warnings += sim.zero_norm_warnings();
            let scores: Vec<f64> = outcomes.iter().map(ProveOutcome::score).collect();
            if argmax(&scores) == ex.answer_index() {
                correct += 1;
            }
            match example_gradients(ex, &outcomes, params, cfg) {
                Some((value, g)) => {
                    total += value;
                    counted += 1;
                    grads.accumulate(&g);
                    pending += 1;
                }
                None => skipped += 1,
            }
            if pending > 0 && (pending == batch || n + 1 == order.len()) {
                grads.scale(1.0 / pending as f64);
                adam_step(params, &grads, &mut state);
                grads = Gradients::new();
                pending = 0;
            }
        }
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: if counted > 0 { total / counted as f64 } else { 0.0 },
            train_accuracy: if dataset.is_empty() { 0.0 } else { correct as f64 / dataset.len() as f64 },
            skipped,
        });
    }
    log.updates = state.step_count();
    log.non_finite_skips = state.non_finite_skips();
    log
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Score of every candidate, in input order.
    pub scores: Vec<f64>,
    pub predicted: usize,
    pub correct: bool,
    /// Best proof of the predicted candidate.
    pub proof: Option<Proof>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<Prediction>,
}

/// Predicts the highest-scoring candidate of every example.
pub fn evaluate_with<S: Similarity + ?Sized>(
    dataset: &[TrainingExample],
    kb: &KnowledgeBase,
    sim: &S,
    cfg: &TrainConfig,
) -> Evaluation {
    let kb = search_kb(kb, cfg.no_rules);
    let pool = pool(cfg.jobs);
    let predictions: Vec<Prediction> = dataset
        .iter()
        .map(|ex| {
            let mut outcomes = with_pool(&pool, |par| prove_all(ex, &kb, sim, &cfg.prover, par));
            let scores: Vec<f64> = outcomes.iter().map(ProveOutcome::score).collect();
            let predicted = argmax(&scores);
            Prediction { correct: predicted == ex.answer_index(), proof: outcomes.swap_remove(predicted).best, scores, predicted }
        })
        .collect();
    let correct = predictions.iter().filter(|p| p.correct).count();
    let accuracy = if dataset.is_empty() { 0.0 } else { correct as f64 / dataset.len() as f64 };
    Evaluation { accuracy, predictions }
}

pub fn evaluate(dataset: &[TrainingExample], kb: &KnowledgeBase, params: &ParameterSet, cfg: &TrainConfig) -> Evaluation {
    evaluate_with(dataset, kb, &LazyEncoded::new(params), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset;
    use crate::embed::{similarity, EncodedSymbols, ExactMatch};
    use crate::kb::{parse_program, Domain};
    use crate::prover::rescore_proof;
    use crate::templates::default_templates;

    fn toy() -> (KnowledgeBase, Vec<TrainingExample>) {
        let mut kb = parse_program(
            "born_in(socrates, athens). located_in(athens, greece).\n\
             born_in(plato, sparta). located_in(sparta, laconia).\n\
             country(X, Z) :- born_in(X, Y), located_in(Y, Z).",
        )
        .unwrap();
        let data = r#"{"query_pred": "country", "subject": "socrates", "candidates": ["laconia", "greece"], "answer": "greece"}
{"query_pred": "country", "subject": "plato", "candidates": ["laconia", "greece"], "answer": "laconia"}"#;
        let ds = parse_dataset(data.as_bytes(), &mut kb.symbols).unwrap();
        (kb, ds)
    }

    fn exact_cfg() -> TrainConfig {
        TrainConfig { prover: ProverConfig { threshold: 1.0, ..Default::default() }, ..Default::default() }
    }

    #[test]
    fn exact_scores() {
        let (kb, ds) = toy();
        let sim = ExactMatch::new(&kb.symbols);
        let cfg = exact_cfg();
        assert_eq!(prove_candidate(&ds[0], ds[0].candidates[1], &kb, &sim, &cfg.prover).score(), 1.0);
        assert_eq!(prove_candidate(&ds[0], ds[0].candidates[0], &kb, &sim, &cfg.prover).score(), 0.0);
        assert_eq!(evaluate_with(&ds, &kb, &sim, &cfg).accuracy, 1.0);
    }

    #[test]
    fn all_zero_scores_pick_first_candidate() {
        let (kb, ds) = toy();
        let cfg = TrainConfig { no_rules: true, ..exact_cfg() };
        let ev = evaluate_with(&ds, &kb, &ExactMatch::new(&kb.symbols), &cfg);
        assert!(ev.predictions.iter().all(|p| p.predicted == 0 && p.scores == [0.0, 0.0]));
        assert_eq!(ev.accuracy, 0.5);
    }

    fn embedded_toy() -> (KnowledgeBase, ParameterSet, Vec<TrainingExample>) {
        let mut kb = parse_program("r(a, b). s(b, c). r(a, d). s(d, e).").unwrap();
        let data = r#"{"query_pred": "q", "subject": "a", "candidates": ["c", "e"], "answer": "c"}"#;
        let ds = parse_dataset(data.as_bytes(), &mut kb.symbols).unwrap();
        let mut kv = KeyedVectors::new(4);
        kv.insert("r", &[1.0, 0.2, 0.0, 0.1]);
        kv.insert("s", &[0.0, 1.0, 0.3, 0.0]);
        let cfg = TrainConfig { seed: 4, ..Default::default() };
        let params = prepare(&mut kb, &ds, &kv, &default_templates(2), &InitConfig::default(), &cfg).unwrap();
        (kb, params, ds)
    }

    #[test]
    fn zero_epochs_leave_parameters() {
        let (kb, mut params, ds) = embedded_toy();
        let before = params.clone();
        let log = train(&ds, &kb, &mut params, &TrainConfig { epochs: 0, ..Default::default() });
        assert!(log.epochs.is_empty());
        assert_eq!(params, before);
    }

    #[test]
    fn two_hop_score_is_product_of_soft_steps() {
        // Unit vectors at chosen angles: sim(q, p1) = 0.9, sim(p2, r) = 0.8,
        // sim(p3, s) = 0.7; distinct entities are orthogonal.
        let mut kb = parse_program("r(a, b). s(b, c).\np1(X, Z) :- p2(X, Y), p3(Y, Z).").unwrap();
        let data = r#"{"query_pred": "q", "subject": "a", "candidates": ["c", "b"], "answer": "c"}"#;
        let ds = parse_dataset(data.as_bytes(), &mut kb.symbols).unwrap();
        let at = |t: f64| vec![t.cos(), t.sin()];
        let gap = |s: f64| (2.0 * s - 1.0).acos();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let ents = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let facts = vec![at(0.0), at(half_pi)];
        let rg = vec![at(2.0), at(gap(0.8)), at(half_pi + gap(0.7)), at(2.0 + gap(0.9))];
        let enc = EncodedSymbols::from_vectors(ents, facts, rg);
        let out = prove_candidate(&ds[0], ds[0].candidates[0], &kb, &enc, &ProverConfig::default());
        assert!((out.score() - 0.9 * 0.8 * 0.7).abs() < 1e-12, "{}", out.score());
        assert_eq!(out.best.unwrap().depth, 1);
    }

    #[test]
    fn rescored_best_proof_matches_search_score() {
        let (kb, params, ds) = embedded_toy();
        let cfg = TrainConfig { prover: ProverConfig { threshold: 0.0, ..Default::default() }, ..Default::default() };
        let sim = LazyEncoded::new(&params);
        let mut checked = 0;
        for &c in &ds[0].candidates {
            if let Some(p) = prove_candidate(&ds[0], c, &kb, &sim, &cfg.prover).best {
                let mut tape = Tape::new();
                let root = rescore_proof(&p, &params, &mut tape, cfg.prover.aggregator);
                assert!((tape.scalar_value(root) - p.score).abs() <= 1e-9);
                checked += 1;
            }
        }
        assert_eq!(checked, 2);
    }

    #[test]
    fn no_rules_gives_fact_only_proofs() {
        let (kb, params, ds) = embedded_toy();
        let cfg = TrainConfig { no_rules: true, prover: ProverConfig { threshold: 0.0, ..Default::default() }, ..Default::default() };
        let ev = evaluate(&ds, &kb, &params, &cfg);
        assert!(ev.predictions.iter().filter_map(|p| p.proof.as_ref()).all(|p| p.depth == 0));
    }

    #[test]
    fn entity_ablation_keeps_predicate_scores() {
        let (kb, params, _) = embedded_toy();
        let mut ablated = params.clone();
        ablated.entity_mlp = None;
        let r = kb.symbols.lookup(Domain::FactPredicate, "r").unwrap();
        let s = kb.symbols.lookup(Domain::FactPredicate, "s").unwrap();
        let q = kb.symbols.lookup(Domain::RuleGoal, "q").unwrap();
        assert_eq!(similarity(r, s, &params), similarity(r, s, &ablated));
        assert_eq!(similarity(q, r, &params), similarity(q, r, &ablated));
        let a = kb.symbols.lookup(Domain::Entity, "a").unwrap();
        let b = kb.symbols.lookup(Domain::Entity, "b").unwrap();
        assert_ne!(similarity(a, b, &params), similarity(a, b, &ablated));
    }

    #[test]
    fn argmax_unchanged_by_scaling_encodings() {
        let (kb, params, ds) = embedded_toy();
        let cfg = TrainConfig { prover: ProverConfig { threshold: 0.0, ..Default::default() }, ..Default::default() };
        let enc = EncodedSymbols::new(&params);
        let base = evaluate_with(&ds, &kb, &enc, &cfg);
        for factor in [0.01, 3.0, 1e4] {
            let scaled = evaluate_with(&ds, &kb, &enc.scaled(factor), &cfg);
            for (a, b) in base.predictions.iter().zip(&scaled.predictions) {
                assert_eq!(a.predicted, b.predicted);
                for (x, y) in a.scores.iter().zip(&b.scores) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unprovable_answer_uses_wrong_term_only() {
        let (kb, params, ds) = embedded_toy();
        let cfg = TrainConfig::default();
        let fake = ProveOutcome { best: None, proofs_found: 0 };
        let sim = LazyEncoded::new(&params);
        let pc = ProverConfig { threshold: 0.0, ..Default::default() };
        let wrong = prove_candidate(&ds[0], ds[0].candidates[1], &kb, &sim, &pc);
        let p = wrong.score();
        let (value, _) = example_gradients(&ds[0], &[fake.clone(), wrong], &params, &cfg).unwrap();
        assert!((value + (1.0 - p).max(1e-6).ln()).abs() < 1e-9);
        assert!(example_gradients(&ds[0], &[fake.clone(), fake], &params, &cfg).is_none());
    }

    #[test]
    fn training_is_deterministic() {
        let (kb, params, ds) = embedded_toy();
        let cfg = TrainConfig { epochs: 3, seed: 2, ..Default::default() };
        let (mut a, mut b) = (params.clone(), params);
        let la = train(&ds, &kb, &mut a, &cfg);
        let lb = train(&ds, &kb, &mut b, &TrainConfig { jobs: 2, ..cfg });
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }
}
