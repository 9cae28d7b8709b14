//! Corpus similarity metrics for picking source domains in cross-domain
//! sentiment analysis.
//!
//! The crate is organised around the pipeline:
//!
//! * [`corpus`] loads and normalises labelled review collections and keeps
//!   word / n-gram statistics.
//! * [`lexstats`] derives per-domain polarity tables, chi-square significant
//!   words and lexicon-based review scores.
//! * [`labelled`] implements the four metrics that need labelled target data
//!   (LM1..LM4), [`embedding`] the seven vector-based ones (ULM1..ULM7).
//! * [`baseline`] handles cross-domain accuracy matrices and the
//!   recommendation chart, [`evaluation`] ranks sources and scores rankings.
//!
//! Pairwise work is spread over rayon when the `parallel` feature is on
//! (default); see [`par::Exec`].

pub mod baseline;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod labelled;
pub mod lexstats;
pub mod metric;
pub mod par;
pub mod synthetic;

pub use error::{Error, Result};
pub use metric::{Direction, MetricId, MetricResult};
