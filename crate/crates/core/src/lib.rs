//! Explainable question answering over a knowledge graph.
//!
//! A three-stage pipeline (entity linking, relation linking, query building)
//! runs over an in-memory graph. Next to every stage a trained classifier
//! predicts whether that stage will succeed, return nothing, or return a
//! wrong result, and the prediction picks an explanation template that is
//! filled with the stage's actual output.

pub mod bench;
pub mod components;
pub mod explain;
pub mod kg;
pub mod outcome;
pub mod pipeline;
pub mod question;
