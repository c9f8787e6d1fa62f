//! Decomposition of Lean 4 tactic proofs into verified lemma datasets, and
//! evaluation of language-model provers against those datasets.

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod decompose;
pub mod eval;
pub mod proof_model;
pub mod repl;
pub mod sim;
