//! Run configuration read from a TOML file.
//!
//! ```toml
//! seed = 3
//! jobs = 1
//!
//! [paths]
//! triples = "data/triples.tsv"
//! vectors = "data/vectors.vec"
//! dataset = "data/train.jsonl"
//! output = "out"
//!
//! [prover]
//! threshold = 0.5
//! max_depth = 3
//! aggregator = "product"
//!
//! [train]
//! epochs = 50
//! template_copies = 2
//!
//! [init]
//! predicate_similarity = 0.85
//! ```
//!
//! Every key is optional. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AdamConfig;
use crate::embed::InitConfig;
use crate::prover::ProverConfig;
use crate::train::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub triples: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    /// Extra facts and hand-written rules in program syntax.
    pub rules: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Second dataset evaluated after training.
    pub heldout: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Training options other than the prover and the seed, which have their
/// own places in [`RunConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: u32,
    pub no_rules: bool,
    pub no_entity_mlp: bool,
    pub clamp: [f64; 2],
    pub adam: AdamConfig,
    pub batch_size: usize,
    /// Copies of each built-in template, used when no template file is
    /// given.
    pub template_copies: u32,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            no_rules: t.no_rules,
            no_entity_mlp: t.no_entity_mlp,
            clamp: t.clamp,
            adam: t.adam,
            batch_size: t.batch_size,
            template_copies: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub paths: Paths,
    pub prover: ProverConfig,
    pub train: TrainSection,
    pub init: InitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 1,
            paths: Paths::default(),
            prover: ProverConfig::default(),
            train: TrainSection::default(),
            init: InitConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot open {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text).map_err(|source| ConfigFileError::Parse { path: path.to_owned(), source })
    }

    pub fn validate(&self) -> Result<(), ConfigFileError> {
        self.prover.validate().map_err(|e| ConfigFileError::Invalid(e.to_string()))?;
        let [lo, hi] = self.train.clamp;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(ConfigFileError::Invalid(format!("clamp must satisfy 0 < lo < hi < 1, got [{lo}, {hi}]")));
        }
        if self.train.batch_size == 0 {
            return Err(ConfigFileError::Invalid("batch_size must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(ConfigFileError::Invalid("jobs must be at least 1".into()));
        }
        if self.init.hidden == Some(0) {
            return Err(ConfigFileError::Invalid("hidden must be at least 1".into()));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            seed: self.seed,
            no_rules: self.train.no_rules,
            no_entity_mlp: self.train.no_entity_mlp,
            prover: self.prover.clone(),
            clamp: self.train.clamp,
            adam: self.train.adam,
            batch_size: self.train.batch_size,
            jobs: self.jobs,
        }
    }
}
