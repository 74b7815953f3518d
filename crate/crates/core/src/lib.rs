//! Desk-scale cross-lingual generation lab.
//!
//! The crate covers the full recipe end to end: monolingual corpus handling,
//! unsupervised auxiliary-task data generation, a small encoder-decoder
//! transformer with hand-written backprop, training with parameter-freeze and
//! EWC policies, and corpus-level NLG metrics. Everything is seeded and
//! deterministic so that experiments are byte-reproducible.

pub mod auxdata;
pub mod corpus;
pub mod error;
pub mod evalsuite;
pub mod model;
pub mod rng;
pub mod training;
pub mod vocab;

pub use error::CoreError;
