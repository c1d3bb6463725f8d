//! Toxic comment classification workbench: shallow and neural classifiers,
//! out-of-fold gradient-boosted stacking, evaluation and error triage.

pub mod artifact;
pub mod corpus;
pub mod embeddings;
pub mod ensemble;
pub mod features;
pub mod metrics;
pub mod models;
pub mod predictions;
pub mod rng;
pub mod triage;
