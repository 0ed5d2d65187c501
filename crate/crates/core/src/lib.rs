//! Evaluation toolkit for multimodal affect recognition: annotation
//! agreement, gold-standard fusion, core-set label selection, from-scratch
//! MLP/GRU regressors, decision fusion, cross-corpus experiments and a
//! Bayesian analysis of the resulting CCC scores.

pub mod agreement;
pub mod bayes;
pub mod cli;
pub mod corpus;
pub mod coreset;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod gold;
pub mod nn;
mod seed;
pub mod stats;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
