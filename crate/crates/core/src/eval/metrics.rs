//! ROUGE-N, ROUGE-L, smoothed corpus BLEU and embedding cosine.
//!
//! All metrics tokenize with [`crate::tokenize::tokenize`] and report on the
//! `[0, 1]` scale.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, EmbeddingProvider};
use crate::tokenize::tokenize;

pub const BLEU_MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("reference has no tokens")]
    EmptyReference,
    #[error("text has no tokens")]
    EmptyText,
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("no examples")]
    NoExamples,
    #[error("n-gram order must be positive")]
    ZeroOrder,
    #[error("embedding failed: {0}")]
    Embed(EmbedError),
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        let f1 = if precision > 0.0 && recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// (clipped overlap, candidate n-gram total, reference n-gram total)
fn clipped_overlap(candidate: &[String], reference: &[String], n: usize) -> (usize, usize, usize) {
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    (overlap, cand.values().sum(), refs.values().sum())
}

fn reference_tokens(reference: &str) -> Result<Vec<String>, MetricError> {
    let tokens = tokenize(reference);
    if tokens.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    Ok(tokens)
}

/// ROUGE-N over n-gram multisets. A text shorter than `n` tokens has no
/// n-grams and scores zero.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Result<Prf, MetricError> {
    if n == 0 {
        return Err(MetricError::ZeroOrder);
    }
    let reference = reference_tokens(reference)?;
    let candidate = tokenize(candidate);
    let (overlap, c, r) = clipped_overlap(&candidate, &reference, n);
    Ok(Prf::from_counts(overlap, c, r))
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y { prev[j] + 1 } else { curr[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L over token sequences.
pub fn rouge_l(candidate: &str, reference: &str) -> Result<Prf, MetricError> {
    let reference = reference_tokens(reference)?;
    let candidate = tokenize(candidate);
    let lcs = lcs_len(&candidate, &reference);
    Ok(Prf::from_counts(lcs, candidate.len(), reference.len()))
}

/// Corpus-level BLEU-4 with uniform weights.
///
/// Each modified precision is add-one smoothed, `(clipped + 1) / (total + 1)`.
/// Orders for which the candidates have no n-grams at all are left out of the
/// geometric mean. Brevity penalty `exp(1 - r/c)` applies when the total
/// candidate length `c` is below the total reference length `r`.
pub fn bleu<C, R>(candidates: &[C], references: &[R]) -> Result<f64, MetricError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::NoExamples);
    }

    let mut clipped = [0usize; BLEU_MAX_ORDER];
    let mut totals = [0usize; BLEU_MAX_ORDER];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        let reference = reference_tokens(r.as_ref())?;
        let candidate = tokenize(c.as_ref());
        cand_len += candidate.len();
        ref_len += reference.len();
        for n in 1..=BLEU_MAX_ORDER {
            let (overlap, total, _) = clipped_overlap(&candidate, &reference, n);
            clipped[n - 1] += overlap;
            totals[n - 1] += total;
        }
    }

    let log_precisions: Vec<f64> = clipped
        .iter()
        .zip(&totals)
        .filter(|(_, &total)| total > 0)
        .map(|(&hit, &total)| ((hit + 1) as f64 / (total + 1) as f64).ln())
        .collect();
    if log_precisions.is_empty() {
        return Ok(0.0);
    }
    let geo_mean = (log_precisions.iter().sum::<f64>() / log_precisions.len() as f64).exp();
    let brevity = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(brevity * geo_mean)
}

/// Cosine similarity of the embeddings of `a` and `b`.
pub fn cosine_metric(a: &str, b: &str, embedder: &dyn EmbeddingProvider) -> Result<f64, MetricError> {
    let embed = |t: &str| {
        embedder.embed(t).map_err(|e| match e {
            EmbedError::EmptyText => MetricError::EmptyText,
            other => MetricError::Embed(other),
        })
    };
    let (ea, eb) = (embed(a)?, embed(b)?);
    let dot = ea.dot(&eb).map_err(MetricError::Embed)?;
    let norms = ea.norm() * eb.norm();
    if norms == 0.0 {
        return Err(MetricError::Embed(EmbedError::ZeroVector));
    }
    Ok(dot / norms)
}
