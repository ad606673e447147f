//! Differentiable weak-unification Datalog prover.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod embed;
pub mod gradcheck;
pub mod kb;
pub mod model;
pub mod oracle;
pub mod prover;
pub mod synthetic;
pub mod templates;
pub mod train;
