//! Weak unification and depth-limited backward chaining.
//!
//! Symbol equality is replaced by a [`Similarity`](crate::embed::Similarity):
//! two symbols unify when their similarity reaches the threshold, and the
//! proof score aggregates every unification score with a t-norm. During
//! the search for one goal the threshold is raised to the best score found
//! so far, which prunes branches that cannot beat it.

mod explain;
mod proof;
mod rescore;
mod search;
mod unify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use explain::{explain, Explanation};
pub use proof::{Clause, Proof, ProofNode, UnificationStep};
pub use rescore::{rescore_proof, rescore_proof_plain, ProofEncoder};
pub use search::{prove, ProveOutcome};
pub use unify::{weak_unify, weak_unify_terms};

/// T-norm combining unification scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Min,
    #[default]
    Product,
}

impl Aggregator {
    pub fn combine(self, acc: f64, score: f64) -> f64 {
        match self {
            Aggregator::Min => acc.min(score),
            Aggregator::Product => acc * score,
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min" => Ok(Aggregator::Min),
            "product" => Ok(Aggregator::Product),
            other => Err(format!("unknown aggregator {other:?} (expected min or product)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProverConfig {
    /// Minimum similarity for two symbols to unify, and minimum proof
    /// score.
    pub threshold: f64,
    /// Maximum number of nested rule applications.
    pub max_depth: u32,
    pub aggregator: Aggregator,
    /// Stop after this many proofs.
    pub max_proofs: Option<u64>,
    /// Raise the threshold to the best score found so far. Disabling it
    /// gives exhaustive enumeration.
    pub dynamic_threshold: bool,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            threshold: 0.5,
            max_depth: 3,
            aggregator: Aggregator::Product,
            max_proofs: None,
            dynamic_threshold: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("threshold must lie in [0, 1], got {0}")]
    Threshold(f64),
    #[error("max_depth must be at least 1")]
    Depth,
}

impl ProverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Threshold(self.threshold));
        }
        if self.max_depth < 1 {
            return Err(ConfigError::Depth);
        }
        Ok(())
    }

    pub fn exhaustive(&self) -> Self {
        ProverConfig { dynamic_threshold: false, max_proofs: None, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ProverConfig::default().validate().is_ok());
        let bad = ProverConfig { threshold: 1.5, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::Threshold(1.5)));
        let bad = ProverConfig { max_depth: 0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::Depth));
    }

    #[test]
    fn aggregators() {
        assert_eq!(Aggregator::Min.combine(0.9, 0.8), 0.8);
        assert!((Aggregator::Product.combine(0.9, 0.8) - 0.72).abs() < 1e-15);
        assert_eq!("min".parse::<Aggregator>(), Ok(Aggregator::Min));
        assert!("max".parse::<Aggregator>().is_err());
    }
}
