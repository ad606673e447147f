use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::MlpParams;
use super::similarity::scaled_cosine;
use super::vectors::{KeyedVectors, VectorTable};
use crate::kb::{Domain, KnowledgeBase, Symbol, Symbols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MlpKind {
    Entity,
    FactPredicate,
    RuleGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MlpPart {
    W1,
    B1,
    W2,
    B2,
}

impl MlpPart {
    pub const ALL: [MlpPart; 4] = [MlpPart::W1, MlpPart::B1, MlpPart::W2, MlpPart::B2];
}

/// Address of one trainable tensor. The pretrained table has no slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamSlot {
    EntityRow(u32),
    RuleGoalRow(u32),
    Mlp(MlpKind, MlpPart),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// MLP hidden width; `None` means the embedding dimension.
    pub hidden: Option<usize>,
    /// Half-width of the uniform range for entity and rule/goal rows;
    /// `None` means `1/sqrt(d)`.
    pub table_range: Option<f64>,
    /// Put an MLP on top of the entity table.
    pub entity_mlp: bool,
    /// Target mean similarity between fresh rule/goal predicates and fact
    /// predicates. When set, a shared random direction is added to the
    /// output bias of both predicate MLPs, scaled to reach the target, so
    /// that multi-atom proofs clear the threshold from the first epoch.
    /// `None` keeps zero biases.
    pub predicate_similarity: Option<f64>,
    /// Shift the entity MLP output bias so encodings of freshly drawn rows
    /// average to zero. Without it ReLU features make every pair of
    /// entities look alike.
    pub center_entities: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { hidden: None, table_range: None, entity_mlp: true, predicate_similarity: Some(0.85), center_entities: true }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InitError {
    #[error("no pretrained vector for {} fact predicate(s): {}", .0.len(), .0.join(", "))]
    MissingPretrained(Vec<String>),
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("fact predicate {0:?} has no pretrained vector")]
    MissingPretrained(String),
    #[error("unknown symbol {0:?}")]
    Unknown(String),
}

/// All model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub entity_table: VectorTable,
    pub entity_mlp: Option<MlpParams>,
    pretrained_table: VectorTable,
    pub fact_pred_mlp: MlpParams,
    pub rulegoal_table: VectorTable,
    pub rulegoal_mlp: MlpParams,
    table_range: f64,
}

// Independent RNG streams so that adding symbols does not shift MLP draws.
const STREAM_ENTITY: u64 = 1;
const STREAM_RULE_GOAL: u64 = 2;
const STREAM_MLP: u64 = 3;
const STREAM_OFFSET: u64 = 6;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_row<R: Rng>(dim: usize, range: f64, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-range..=range)).collect()
}

const CALIBRATION_PROBES: usize = 32;

fn mean_similarity(a: &[Vec<f64>], b: &[Vec<f64>], u: &[f64], t: f64) -> f64 {
    let shift = |v: &Vec<f64>| -> Vec<f64> { v.iter().zip(u).map(|(x, y)| x + t * y).collect() };
    let (a, b): (Vec<_>, Vec<_>) = (a.iter().map(shift).collect(), b.iter().map(shift).collect());
    let total: f64 = a.iter().flat_map(|x| b.iter().map(move |y| scaled_cosine(x, y))).sum();
    total / (a.len() * b.len()) as f64
}

/// Smallest scale found by bisection at which shifting both sides by
/// `t * u` lifts their mean similarity to `target`.
fn offset_for(a: &[Vec<f64>], b: &[Vec<f64>], u: &[f64], target: f64) -> f64 {
    if a.is_empty() || b.is_empty() || mean_similarity(a, b, u, 0.0) >= target {
        return 0.0;
    }
    let mut hi = 1.0;
    while mean_similarity(a, b, u, hi) < target && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mean_similarity(a, b, u, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Builds a fresh parameter set for `kb`.
///
/// Every fact predicate needs a row in `pretrained`; all missing patterns
/// are reported together.
pub fn init_parameters(
    kb: &KnowledgeBase,
    pretrained: &KeyedVectors,
    cfg: &InitConfig,
    seed: u64,
) -> Result<ParameterSet, InitError> {
    let d = pretrained.dim();
    let h = cfg.hidden.unwrap_or(d);
    let range = cfg.table_range.unwrap_or(1.0 / (d as f64).sqrt());

    let mut pretrained_table = VectorTable::new(d);
    let mut missing = Vec::new();
    for s in kb.symbols.iter(Domain::FactPredicate) {
        let text = kb.symbols.text(s);
        match pretrained.get(text) {
            Some(row) => {
                pretrained_table.push(row);
            }
            None => {
                missing.push(text.to_owned());
                pretrained_table.push(&vec![0.0; d]);
            }
        }
    }
    if !missing.is_empty() {
        return Err(InitError::MissingPretrained(missing));
    }

    let mut rng = stream_rng(seed, STREAM_ENTITY);
    let mut entity_table = VectorTable::new(d);
    for _ in 0..kb.symbols.len(Domain::Entity) {
        entity_table.push(&uniform_row(d, range, &mut rng));
    }
    let mut rng = stream_rng(seed, STREAM_RULE_GOAL);
    let mut rulegoal_table = VectorTable::new(d);
    for _ in 0..kb.symbols.len(Domain::RuleGoal) {
        rulegoal_table.push(&uniform_row(d, range, &mut rng));
    }
    let mut rng = stream_rng(seed, STREAM_MLP);
    let mut entity_mlp = MlpParams::he(d, h, &mut rng);
    if cfg.center_entities {
        entity_mlp.center_output(range);
    }
    let mut fact_pred_mlp = MlpParams::he(d, h, &mut rng);
    let mut rulegoal_mlp = MlpParams::he(d, h, &mut rng);
    if let Some(target) = cfg.predicate_similarity {
        let mut rng = stream_rng(seed, STREAM_OFFSET);
        let u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let probes: Vec<Vec<f64>> =
            (0..CALIBRATION_PROBES).map(|_| rulegoal_mlp.forward(&uniform_row(d, range, &mut rng))).collect();
        let facts: Vec<Vec<f64>> = pretrained_table.rows().map(|r| fact_pred_mlp.forward(r)).collect();
        let t = offset_for(&probes, &facts, &u, target);
        for mlp in [&mut fact_pred_mlp, &mut rulegoal_mlp] {
            for (b, x) in mlp.b2.iter_mut().zip(&u) {
                *b += t * x;
            }
        }
    }

    Ok(ParameterSet {
        entity_table,
        entity_mlp: cfg.entity_mlp.then_some(entity_mlp),
        pretrained_table,
        fact_pred_mlp,
        rulegoal_table,
        rulegoal_mlp,
        table_range: range,
    })
}

impl ParameterSet {
    /// Assembles a parameter set from explicit parts.
    pub fn from_parts(
        entity_table: VectorTable,
        entity_mlp: Option<MlpParams>,
        pretrained_table: VectorTable,
        fact_pred_mlp: MlpParams,
        rulegoal_table: VectorTable,
        rulegoal_mlp: MlpParams,
    ) -> Self {
        let dim = entity_table.dim();
        ParameterSet {
            entity_table,
            entity_mlp,
            pretrained_table,
            fact_pred_mlp,
            rulegoal_table,
            rulegoal_mlp,
            table_range: 1.0 / (dim as f64).sqrt(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entity_table.dim()
    }

    pub fn pretrained_table(&self) -> &VectorTable {
        &self.pretrained_table
    }

    pub fn mlp(&self, kind: MlpKind) -> Option<&MlpParams> {
        match kind {
            MlpKind::Entity => self.entity_mlp.as_ref(),
            MlpKind::FactPredicate => Some(&self.fact_pred_mlp),
            MlpKind::RuleGoal => Some(&self.rulegoal_mlp),
        }
    }

    fn mlp_mut(&mut self, kind: MlpKind) -> Option<&mut MlpParams> {
        match kind {
            MlpKind::Entity => self.entity_mlp.as_mut(),
            MlpKind::FactPredicate => Some(&mut self.fact_pred_mlp),
            MlpKind::RuleGoal => Some(&mut self.rulegoal_mlp),
        }
    }

    pub fn slot(&self, slot: ParamSlot) -> Option<&[f64]> {
        match slot {
            ParamSlot::EntityRow(i) => self.entity_table.row(i as usize),
            ParamSlot::RuleGoalRow(i) => self.rulegoal_table.row(i as usize),
            ParamSlot::Mlp(kind, part) => self.mlp(kind).map(|m| match part {
                MlpPart::W1 => m.w1.as_slice(),
                MlpPart::B1 => &m.b1,
                MlpPart::W2 => &m.w2,
                MlpPart::B2 => &m.b2,
            }),
        }
    }

    pub fn slot_mut(&mut self, slot: ParamSlot) -> Option<&mut [f64]> {
        match slot {
            ParamSlot::EntityRow(i) => self.entity_table.row_mut(i as usize),
            ParamSlot::RuleGoalRow(i) => self.rulegoal_table.row_mut(i as usize),
            ParamSlot::Mlp(kind, part) => self.mlp_mut(kind).map(|m| match part {
                MlpPart::W1 => m.w1.as_mut_slice(),
                MlpPart::B1 => &mut m.b1,
                MlpPart::W2 => &mut m.w2,
                MlpPart::B2 => &mut m.b2,
            }),
        }
    }

    /// Every trainable slot in a fixed order.
    pub fn trainable_slots(&self) -> Vec<ParamSlot> {
        let mut out: Vec<ParamSlot> =
            (0..self.entity_table.len() as u32).map(ParamSlot::EntityRow).collect();
        out.extend((0..self.rulegoal_table.len() as u32).map(ParamSlot::RuleGoalRow));
        for kind in [MlpKind::Entity, MlpKind::FactPredicate, MlpKind::RuleGoal] {
            if self.mlp(kind).is_some() {
                out.extend(MlpPart::ALL.iter().map(|&p| ParamSlot::Mlp(kind, p)));
            }
        }
        out
    }

    /// Adds random rows for symbols created after initialisation, drawing
    /// from a stream keyed by `seed`.
    pub fn grow_to(&mut self, symbols: &Symbols, seed: u64) {
        let d = self.dim();
        let range = self.table_range;
        let mut rng = stream_rng(seed, 100 + self.entity_table.len() as u64);
        while self.entity_table.len() < symbols.len(Domain::Entity) {
            self.entity_table.push(&uniform_row(d, range, &mut rng));
        }
        let mut rng = stream_rng(seed, 1_000_000 + self.rulegoal_table.len() as u64);
        while self.rulegoal_table.len() < symbols.len(Domain::RuleGoal) {
            self.rulegoal_table.push(&uniform_row(d, range, &mut rng));
        }
    }

    /// Appends one uniformly initialised rule/goal row.
    pub fn push_rulegoal_row<R: Rng>(&mut self, rng: &mut R) -> u32 {
        let row = uniform_row(self.dim(), self.table_range, rng);
        self.rulegoal_table.push(&row) as u32
    }

    /// Raw input row for a symbol, before its MLP.
    pub fn input_row(&self, s: Symbol) -> Option<&[f64]> {
        match s.domain {
            Domain::Entity => self.entity_table.row(s.id as usize),
            Domain::FactPredicate => self.pretrained_table.row(s.id as usize),
            Domain::RuleGoal => self.rulegoal_table.row(s.id as usize),
        }
    }

    pub fn encoder_mlp(&self, domain: Domain) -> Option<&MlpParams> {
        match domain {
            Domain::Entity => self.entity_mlp.as_ref(),
            Domain::FactPredicate => Some(&self.fact_pred_mlp),
            Domain::RuleGoal => Some(&self.rulegoal_mlp),
        }
    }

    /// Encoded vector of `s`: MLP of its input row, or the raw row for
    /// entities when the entity MLP is ablated.
    pub fn encode(&self, s: Symbol) -> Option<Vec<f64>> {
        let row = self.input_row(s)?;
        Some(match self.encoder_mlp(s.domain) {
            Some(m) => m.forward(row),
            None => row.to_vec(),
        })
    }
}

/// Encodes `s`, naming the symbol in the error.
pub fn encode_symbol(s: Symbol, params: &ParameterSet, symbols: &Symbols) -> Result<Vec<f64>, EncodeError> {
    params.encode(s).ok_or_else(|| {
        let text = if (s.id as usize) < symbols.len(s.domain) {
            symbols.text(s).to_owned()
        } else {
            format!("#{}", s.id)
        };
        if s.domain == Domain::FactPredicate {
            EncodeError::MissingPretrained(text)
        } else {
            EncodeError::Unknown(text)
        }
    })
}
