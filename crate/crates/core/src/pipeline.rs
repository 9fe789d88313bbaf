//! The two-stage answering flow.
//!
//! `truncate → embed → normalize → stage-I top-k → (optional) rerank →
//! (optional) generate`, with slide metadata resolved from the corpus.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::corpus::Corpus;
use crate::embedding::{EmbedError, EmbeddingProvider};
use crate::index::{Candidate, FlatIndex, IndexError, DEFAULT_K};
use crate::rerank::{rerank, PairScorer, RerankError};
use crate::tokenize::is_token_char;

pub const DEFAULT_MAX_INPUT_CHARS: usize = 2048;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query has no tokens")]
    EmptyQuery,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("query embedding failed: {0}")]
    Embed(#[source] EmbedError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error("index document {0:?} is not in the corpus")]
    UnknownDocument(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct GenerateError(pub String);

/// Optionally rewrites the retrieved answer before it is shown.
pub trait GeneratorAdapter: Send + Sync {
    fn generate(&self, query: &str, context: &str) -> Result<String, GenerateError>;

    fn name(&self) -> &str;
}

/// Returns the retrieved text verbatim.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passthrough;

impl GeneratorAdapter for Passthrough {
    fn generate(&self, _query: &str, context: &str) -> Result<String, GenerateError> {
        Ok(context.to_owned())
    }

    fn name(&self) -> &str {
        "passthrough"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Stage-I candidates.
    pub k: usize,
    pub rerank_enabled: bool,
    pub max_input_chars: usize,
    /// Candidates kept in the response.
    pub final_n: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            rerank_enabled: true,
            max_input_chars: DEFAULT_MAX_INPUT_CHARS,
            final_n: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.k == 0 || self.final_n == 0 || self.max_input_chars == 0 {
            return Err(PipelineError::InvalidConfig(
                "k, final_n and max_input_chars must be positive".into(),
            ));
        }
        if self.final_n > self.k {
            return Err(PipelineError::InvalidConfig(format!(
                "final_n ({}) exceeds k ({})",
                self.final_n, self.k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResponse {
    pub query_used: String,
    pub best: Candidate,
    pub candidates: Vec<Candidate>,
    pub answer_text: String,
    pub week: u32,
    pub slide: u32,
    pub image_ref: Option<String>,
    /// Set when the generator failed and the retrieved text was used instead.
    pub degraded: bool,
}

/// Cuts `text` to at most `max_chars` characters without splitting a token.
///
/// A token cut by the limit is dropped along with the whitespace before it.
/// If the first token alone exceeds the limit there is no boundary to snap
/// to, and the text is cut at exactly `max_chars`.
pub fn truncate_input(text: &str, max_chars: usize) -> &str {
    let Some((cut, next)) = text.char_indices().nth(max_chars) else {
        return text;
    };
    let head = &text[..cut];
    let mid_token = is_token_char(next) && head.chars().next_back().is_some_and(is_token_char);
    let kept = if mid_token {
        match head.rfind(|c: char| !is_token_char(c)) {
            Some(boundary) => &head[..boundary],
            None => return head,
        }
    } else {
        head
    };
    match kept.trim_end() {
        "" => head,
        trimmed => trimmed,
    }
}

/// Borrowed view over everything one retrieval needs.
pub struct Pipeline<'a> {
    index: &'a FlatIndex,
    corpus: &'a Corpus,
    embedder: &'a dyn EmbeddingProvider,
    scorer: &'a dyn PairScorer,
    generator: &'a dyn GeneratorAdapter,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        index: &'a FlatIndex,
        corpus: &'a Corpus,
        embedder: &'a dyn EmbeddingProvider,
        scorer: &'a dyn PairScorer,
    ) -> Self {
        Self {
            index,
            corpus,
            embedder,
            scorer,
            generator: &Passthrough,
        }
    }

    pub fn with_generator(mut self, generator: &'a dyn GeneratorAdapter) -> Self {
        self.generator = generator;
        self
    }

    pub fn scorer_name(&self) -> &str {
        self.scorer.name()
    }

    pub fn generator_name(&self) -> &str {
        self.generator.name()
    }

    /// Full candidate ranking (all k), plus the truncated query it was
    /// computed for.
    pub fn rank(&self, query: &str, cfg: &PipelineConfig) -> Result<(String, Vec<Candidate>), PipelineError> {
        cfg.validate()?;
        let query_used = truncate_input(query, cfg.max_input_chars).to_owned();
        let embedding = self
            .embedder
            .embed(&query_used)
            .and_then(|e| e.normalize())
            .map_err(|e| match e {
                EmbedError::EmptyText => PipelineError::EmptyQuery,
                other => PipelineError::Embed(other),
            })?;
        let stage1 = self.index.search(&embedding, cfg.k)?;
        let ranked = if cfg.rerank_enabled {
            rerank(&query_used, &stage1, self.corpus, self.scorer)?.ranked
        } else {
            stage1
        };
        Ok((query_used, ranked))
    }

    pub fn retrieve(&self, query: &str, cfg: &PipelineConfig) -> Result<RetrievalResponse, PipelineError> {
        let (query_used, mut ranked) = self.rank(query, cfg)?;
        ranked.truncate(cfg.final_n);
        let best = ranked[0].clone();
        let record = self
            .corpus
            .get(&best.doc_id)
            .ok_or_else(|| PipelineError::UnknownDocument(best.doc_id.clone()))?;

        let (answer_text, degraded) = match self.generator.generate(&query_used, &record.answer_text) {
            Ok(text) => (text, false),
            Err(e) => {
                warn!(generator = self.generator.name(), error = %e, "generator failed; using retrieved text");
                (record.answer_text.clone(), true)
            }
        };

        Ok(RetrievalResponse {
            query_used,
            best,
            candidates: ranked,
            answer_text,
            week: record.week,
            slide: record.slide,
            image_ref: record.image_ref.clone(),
            degraded,
        })
    }
}
