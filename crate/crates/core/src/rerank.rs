//! Stage-II reranking.
//!
//! Each stage-I candidate is paired with the query, scored by a
//! [`PairScorer`], and the list is re-sorted by that relevance score. Ties
//! fall back to the stage-I score and then to the document id.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::index::Candidate;
use crate::tokenize::tokenize;

/// Literal separator token between query and candidate.
pub const SEP: &str = "[SEP]";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ScoreError(pub String);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RerankError {
    #[error("query or candidate text is empty")]
    EmptyText,
    #[error("no candidates to rerank")]
    NoCandidates,
    #[error("no text for document {0:?}")]
    MissingDocument(String),
    #[error("scorer failed on document {doc_id:?}: {message}")]
    ScorerFailure { doc_id: String, message: String },
}

/// Scores how well `candidate` answers `query`.
pub trait PairScorer: Send + Sync {
    fn score(&self, query: &str, candidate: &str) -> Result<f64, ScoreError>;

    fn name(&self) -> &str;
}

/// Lookup from document id to the text the scorer should see.
pub trait DocumentTexts: Sync {
    fn text(&self, doc_id: &str) -> Option<&str>;
}

impl DocumentTexts for HashMap<String, String> {
    fn text(&self, doc_id: &str) -> Option<&str> {
        self.get(doc_id).map(String::as_str)
    }
}

/// Candidates of one query, best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedResult {
    pub query: String,
    pub ranked: Vec<Candidate>,
}

/// Builds the cross-encoder input `"<query> [SEP] <candidate>"`.
pub fn format_pair(query: &str, candidate: &str) -> Result<String, RerankError> {
    if query.is_empty() || candidate.is_empty() {
        return Err(RerankError::EmptyText);
    }
    Ok(format!("{query} {SEP} {candidate}"))
}

/// Token-set F1 between query and candidate (duplicates removed).
pub fn lexical_score(query: &str, candidate: &str) -> Result<f64, RerankError> {
    let q: BTreeSet<String> = tokenize(query).into_iter().collect();
    let c: BTreeSet<String> = tokenize(candidate).into_iter().collect();
    if q.is_empty() || c.is_empty() {
        return Err(RerankError::EmptyText);
    }
    let overlap = q.intersection(&c).count();
    if overlap == 0 {
        return Ok(0.0);
    }
    let precision = overlap as f64 / c.len() as f64;
    let recall = overlap as f64 / q.len() as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Reference scorer: [`lexical_score`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalScorer;

impl PairScorer for LexicalScorer {
    fn score(&self, query: &str, candidate: &str) -> Result<f64, ScoreError> {
        lexical_score(query, candidate).map_err(|e| ScoreError(e.to_string()))
    }

    fn name(&self) -> &str {
        "lexical"
    }
}

/// Final ordering: stage-II desc, then stage-I desc, then doc id asc.
pub fn rank_order(a: &Candidate, b: &Candidate) -> Ordering {
    let s2 = |c: &Candidate| c.stage2_score.unwrap_or(f64::NEG_INFINITY);
    s2(b)
        .total_cmp(&s2(a))
        .then_with(|| b.stage1_score.total_cmp(&a.stage1_score))
        .then_with(|| a.doc_id.cmp(&b.doc_id))
}

/// Scores every candidate against `query` and sorts by the result.
///
/// Candidates are scored in parallel; the outcome is identical to scoring
/// them one by one.
pub fn rerank(
    query: &str,
    candidates: &[Candidate],
    texts: &dyn DocumentTexts,
    scorer: &dyn PairScorer,
) -> Result<RankedResult, RerankError> {
    if query.is_empty() {
        return Err(RerankError::EmptyText);
    }
    if candidates.is_empty() {
        return Err(RerankError::NoCandidates);
    }
    let resolved = candidates
        .iter()
        .map(|c| {
            texts
                .text(&c.doc_id)
                .map(|t| (c, t))
                .ok_or_else(|| RerankError::MissingDocument(c.doc_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut ranked = resolved
        .into_par_iter()
        .map(|(c, text)| {
            let failure = |message: String| RerankError::ScorerFailure {
                doc_id: c.doc_id.clone(),
                message,
            };
            let score = scorer.score(query, text).map_err(|e| failure(e.0))?;
            if !score.is_finite() {
                return Err(failure(format!("non-finite score {score}")));
            }
            Ok(Candidate {
                stage2_score: Some(score),
                ..c.clone()
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ranked.sort_by(rank_order);

    Ok(RankedResult {
        query: query.to_owned(),
        ranked,
    })
}
