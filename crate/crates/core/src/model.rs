//! Trained-model directory: `entities.vec` and `predicates.vec` hold the
//! learnable tables in the vector file format, `mlp.json` the three
//! encoders and `rules.pl` the instantiated rules.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{init_parameters, load_pretrained, write_vectors, InitConfig, InitError, KeyedVectors, MlpParams, ParameterSet, VectorFileError};
use crate::kb::{Domain, KnowledgeBase, ParseError};

pub const ENTITIES_FILE: &str = "entities.vec";
pub const PREDICATES_FILE: &str = "predicates.vec";
pub const MLP_FILE: &str = "mlp.json";
pub const RULES_FILE: &str = "rules.pl";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot open {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Vectors { path: PathBuf, source: VectorFileError },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Rules { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("{path}: dimension {found} does not match {expected}")]
    Dimension { path: PathBuf, expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpFile {
    entity: Option<MlpParams>,
    fact_predicate: MlpParams,
    rule_goal: MlpParams,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { path: path.to_owned(), source }
}

fn table_rows(kb: &KnowledgeBase, params: &ParameterSet, domain: Domain) -> Vec<(String, Vec<f64>)> {
    kb.symbols
        .iter(domain)
        .filter_map(|s| params.input_row(s).map(|r| (kb.symbols.text(s).to_owned(), r.to_vec())))
        .collect()
}

fn write_table(path: &Path, dim: usize, rows: &[(String, Vec<f64>)]) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    write_vectors(&mut w, dim, rows.iter().map(|(k, v)| (k.as_str(), v.as_slice()))).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Writes `params` and the rules of `kb` into `dir`, creating it if needed.
pub fn save_model(dir: &Path, kb: &KnowledgeBase, params: &ParameterSet) -> Result<(), ModelError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let d = params.dim();
    write_table(&dir.join(ENTITIES_FILE), d, &table_rows(kb, params, Domain::Entity))?;
    write_table(&dir.join(PREDICATES_FILE), d, &table_rows(kb, params, Domain::RuleGoal))?;
    let mlp = MlpFile {
        entity: params.entity_mlp.clone(),
        fact_predicate: params.fact_pred_mlp.clone(),
        rule_goal: params.rulegoal_mlp.clone(),
    };
    let path = dir.join(MLP_FILE);
    let json = serde_json::to_string_pretty(&mlp).map_err(|source| ModelError::Json { path: path.clone(), source })?;
    std::fs::write(&path, json + "\n").map_err(io_err(&path))?;
    let rules = KnowledgeBase { symbols: kb.symbols.clone(), facts: Vec::new(), rules: kb.rules.clone() };
    let path = dir.join(RULES_FILE);
    std::fs::write(&path, rules.to_program_text()).map_err(io_err(&path))
}

fn read_table(path: &Path) -> Result<KeyedVectors, ModelError> {
    let f = File::open(path).map_err(io_err(path))?;
    load_pretrained(BufReader::new(f)).map_err(|source| ModelError::Vectors { path: path.to_owned(), source })
}

/// Adds the saved rules to `kb` and rebuilds the parameters.
///
/// Symbols of `kb` without a saved row, such as entities that were never
/// seen in training, keep the rows drawn by a fresh initialisation with
/// `seed`.
pub fn load_model(dir: &Path, kb: &mut KnowledgeBase, pretrained: &KeyedVectors, seed: u64) -> Result<ParameterSet, ModelError> {
    let path = dir.join(RULES_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    kb.extend_program(&text).map_err(|source| ModelError::Rules { path: path.clone(), source })?;

    let path = dir.join(MLP_FILE);
    let json = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mlp: MlpFile = serde_json::from_str(&json).map_err(|source| ModelError::Json { path: path.clone(), source })?;
    let entities = read_table(&dir.join(ENTITIES_FILE))?;
    let preds = read_table(&dir.join(PREDICATES_FILE))?;
    let dim = mlp.fact_predicate.dim;
    for (p, found) in [
        (dir.join(ENTITIES_FILE), entities.dim()),
        (dir.join(PREDICATES_FILE), preds.dim()),
        (dir.join(MLP_FILE), mlp.rule_goal.dim),
        (PathBuf::from("pretrained vectors"), pretrained.dim()),
    ] {
        if found != dim {
            return Err(ModelError::Dimension { path: p, expected: dim, found });
        }
    }

    let init = InitConfig { entity_mlp: mlp.entity.is_some(), predicate_similarity: None, ..Default::default() };
    let mut params = init_parameters(kb, pretrained, &init, seed)?;
    for (domain, table) in [(Domain::Entity, &entities), (Domain::RuleGoal, &preds)] {
        for s in kb.symbols.iter(domain).collect::<Vec<_>>() {
            if let Some(row) = table.get(kb.symbols.text(s)) {
                let slot = if domain == Domain::Entity {
                    params.entity_table.row_mut(s.id as usize)
                } else {
                    params.rulegoal_table.row_mut(s.id as usize)
                };
                slot.expect("table covers every symbol").copy_from_slice(row);
            }
        }
    }
    params.entity_mlp = mlp.entity;
    params.fact_pred_mlp = mlp.fact_predicate;
    params.rulegoal_mlp = mlp.rule_goal;
    Ok(params)
}
