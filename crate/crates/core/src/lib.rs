//! Document-level context retrieval for named entity recognition.
//!
//! Long documents such as novels do not fit into a transformer's input, so a
//! sentence is tagged together with a handful of sentences retrieved from the
//! rest of the book. This crate provides the whole pipeline around that idea:
//!
//! - [`corpus`]: CoNLL-style corpus ingestion, sentence segmentation and BIO decoding.
//! - [`retrieval`]: unsupervised candidate generation (BM25, same-noun,
//!   surrounding sentences) and the pooled candidate set.
//! - [`rerank`]: relevance scorers (random, lexical, remote cross-encoder),
//!   top-k selection and context assembly.
//! - [`datagen`]: synthetic relevance dataset generation through an
//!   instruction-following LLM.
//! - [`nerbridge`]: connection to an external NER tagger and query-span slicing.
//! - [`eval`]: entity-level metrics, k-fold experiments and report emission.

pub mod config;
pub mod corpus;
pub mod datagen;
pub mod error;
pub mod eval;
mod http;
pub mod nerbridge;
pub mod rerank;
pub mod retrieval;
pub mod seed;

pub use error::{Error, Result};
