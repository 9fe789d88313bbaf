//! Core of the lectern teaching assistant.
//!
//! Answers come out of a two-stage retrieval flow:
//!
//! 1. the query is embedded, normalized to a unit vector and matched against
//!    a [`FlatIndex`] of unit-normalized answer embeddings by exact inner
//!    product;
//! 2. the top-k candidates are rescored pairwise (`query [SEP] candidate`)
//!    by a [`PairScorer`] and re-sorted.
//!
//! Around that flow sit the [`corpus`] loader for slide/transcript/QA
//! datasets and the [`eval`] harness (ROUGE, BLEU, cosine, reranker
//! ablation).
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod index;
pub mod pipeline;
pub mod rerank;
pub mod tokenize;

pub use corpus::{Corpus, CorpusError, DocumentRecord, Issue, QuestionType};
pub use embedding::{EmbedError, EmbeddingProvider, EmbeddingVector, HashEmbedder};
pub use index::{Candidate, FlatIndex, IndexError};
pub use pipeline::{GenerateError, GeneratorAdapter, Passthrough, PipelineConfig, PipelineError, RetrievalResponse};
pub use rerank::{LexicalScorer, PairScorer, RankedResult, RerankError, ScoreError};
