//! Text classification from label names only.
//!
//! The pipeline mines a category vocabulary for each class from masked-LM
//! replacements of its label names ([`category_vocab`]), finds
//! category-indicative words in context and trains a classifier to predict
//! their class with the word masked out ([`mcp`]), then generalizes to whole
//! documents by self-training on sharpened soft targets ([`selftrain`]).
//! [`baselines`] holds the comparison methods and the accuracy harness;
//! [`pipeline`] wires the stages together with on-disk caching.

pub mod baselines;
pub mod category_vocab;
pub mod corpus;
pub mod error;
pub mod lm;
pub mod mcp;
pub mod pipeline;
pub mod selftrain;
pub mod stopwords;

pub use error::{Error, Result};
