//! Context-aware citation recommendation: lexical, embedding and topic-model
//! retrievers, stochastic rank fusion, and an offline evaluation harness.

pub mod bm25;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod hybrid;
pub mod jsonl;
pub mod lda;
pub mod pipeline;
pub mod ranking;
pub mod synth;
pub mod textproc;

pub use error::{Error, Result};
pub use ranking::{RankedList, Recommender};
