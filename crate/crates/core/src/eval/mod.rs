//! Evaluation harness.
//!
//! Every corpus record with a question becomes one example: the question is
//! run through the pipeline and the returned answer is scored against the
//! record's own answer. ROUGE and cosine are macro-averaged over examples;
//! BLEU is computed at corpus level.

pub mod metrics;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embedding::EmbeddingProvider;
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError};
use crate::tokenize::tokenize;

pub use metrics::{bleu, cosine_metric, lcs_len, rouge_l, rouge_n, MetricError, Prf};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("corpus has no records")]
    EmptyCorpus,
    #[error("record {doc_id:?} has no question")]
    MissingQuestion { doc_id: String },
    #[error("record {doc_id:?}: {source}")]
    Pipeline {
        doc_id: String,
        #[source]
        source: PipelineError,
    },
    #[error("record {doc_id:?}: {source}")]
    Metric {
        doc_id: String,
        #[source]
        source: MetricError,
    },
}

/// Aggregate scores of one pipeline configuration, all on `[0, 1]`
/// (cosine on `[-1, 1]`). ROUGE figures are macro averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub config_label: String,
    pub n_examples: usize,
    pub rouge1: Prf,
    pub rouge2: Prf,
    #[serde(rename = "rougeL")]
    pub rouge_l: Prf,
    pub bleu: f64,
    pub cosine: f64,
    /// Fraction of questions whose own record came back first.
    pub recall_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub with_rerank: MetricReport,
    pub without_rerank: MetricReport,
}

/// Display scale for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Unit,
    Percent,
}

impl Scale {
    fn apply(self, v: f64) -> f64 {
        match self {
            Scale::Unit => v,
            Scale::Percent => v * 100.0,
        }
    }
}

struct ExampleScore {
    rouge1: Prf,
    rouge2: Prf,
    rouge_l: Prf,
    cosine: f64,
    hit: bool,
    prediction: String,
}

pub fn config_label(cfg: &PipelineConfig, scorer: &str) -> String {
    if cfg.rerank_enabled {
        format!("rerank=on k={} scorer={scorer}", cfg.k)
    } else {
        format!("rerank=off k={}", cfg.k)
    }
}

/// Runs every record's question through `pipeline` under `cfg`.
///
/// `metric_embedder` computes the cosine column; it is independent of the
/// embedder used for retrieval. Records are evaluated in parallel, and the
/// report is identical to a sequential run.
pub fn run_eval(
    corpus: &Corpus,
    cfg: &PipelineConfig,
    pipeline: &Pipeline<'_>,
    metric_embedder: &dyn EmbeddingProvider,
) -> Result<MetricReport, EvalError> {
    if corpus.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }

    let outcomes: Vec<Result<ExampleScore, EvalError>> = corpus
        .records()
        .par_iter()
        .map(|record| {
            let doc_id = || record.doc_id.clone();
            let question = record
                .question_text
                .as_deref()
                .filter(|q| !tokenize(q).is_empty())
                .ok_or_else(|| EvalError::MissingQuestion { doc_id: doc_id() })?;
            let response = pipeline.retrieve(question, cfg).map_err(|source| EvalError::Pipeline {
                doc_id: doc_id(),
                source,
            })?;
            let metric = |source| EvalError::Metric {
                doc_id: doc_id(),
                source,
            };
            let prediction = response.answer_text;
            let reference = &record.answer_text;
            Ok(ExampleScore {
                rouge1: rouge_n(&prediction, reference, 1).map_err(metric)?,
                rouge2: rouge_n(&prediction, reference, 2).map_err(metric)?,
                rouge_l: rouge_l(&prediction, reference).map_err(metric)?,
                cosine: cosine_metric(&prediction, reference, metric_embedder).map_err(metric)?,
                hit: response.best.doc_id == record.doc_id,
                prediction,
            })
        })
        .collect();

    let scores = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;
    let n = scores.len();
    let mean = |f: &dyn Fn(&ExampleScore) -> f64| scores.iter().map(f).sum::<f64>() / n as f64;
    let mean_prf = |f: &dyn Fn(&ExampleScore) -> Prf| Prf {
        precision: mean(&|s| f(s).precision),
        recall: mean(&|s| f(s).recall),
        f1: mean(&|s| f(s).f1),
    };

    let predictions: Vec<&str> = scores.iter().map(|s| s.prediction.as_str()).collect();
    let references: Vec<&str> = corpus.records().iter().map(|r| r.answer_text.as_str()).collect();
    let bleu = bleu(&predictions, &references).map_err(|source| EvalError::Metric {
        doc_id: "<corpus>".into(),
        source,
    })?;

    Ok(MetricReport {
        config_label: config_label(cfg, pipeline.scorer_name()),
        n_examples: n,
        rouge1: mean_prf(&|s| s.rouge1),
        rouge2: mean_prf(&|s| s.rouge2),
        rouge_l: mean_prf(&|s| s.rouge_l),
        bleu,
        cosine: mean(&|s| s.cosine),
        recall_at_1: mean(&|s| if s.hit { 1.0 } else { 0.0 }),
    })
}

/// Evaluates `cfg` with the reranker switched on and off.
pub fn run_ablation(
    corpus: &Corpus,
    cfg: &PipelineConfig,
    pipeline: &Pipeline<'_>,
    metric_embedder: &dyn EmbeddingProvider,
) -> Result<AblationReport, EvalError> {
    let on = PipelineConfig {
        rerank_enabled: true,
        ..cfg.clone()
    };
    let off = PipelineConfig {
        rerank_enabled: false,
        ..cfg.clone()
    };
    Ok(AblationReport {
        with_rerank: run_eval(corpus, &on, pipeline, metric_embedder)?,
        without_rerank: run_eval(corpus, &off, pipeline, metric_embedder)?,
    })
}

/// Plain-text table of one report.
pub fn format_report(report: &MetricReport, scale: Scale) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} (n={})", report.config_label, report.n_examples);
    let _ = writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>10}",
        "metric", "precision", "recall", "f1"
    );
    for (name, prf) in [
        ("rouge1", report.rouge1),
        ("rouge2", report.rouge2),
        ("rougeL", report.rouge_l),
    ] {
        let _ = writeln!(
            out,
            "{:<10} {:>10.4} {:>10.4} {:>10.4}",
            name,
            scale.apply(prf.precision),
            scale.apply(prf.recall),
            scale.apply(prf.f1)
        );
    }
    for (name, v) in [
        ("bleu", report.bleu),
        ("cosine", report.cosine),
        ("recall@1", report.recall_at_1),
    ] {
        let _ = writeln!(out, "{:<10} {:>32.4}", name, scale.apply(v));
    }
    out
}

/// Side-by-side table of the with/without-reranker runs. ROUGE columns are F1.
pub fn format_ablation(report: &AblationReport, scale: Scale) -> String {
    let (on, off) = (&report.with_rerank, &report.without_rerank);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>18} {:>18}",
        "metric", "with reranker", "without reranker"
    );
    for (name, a, b) in [
        ("ROUGE-1 (F1)", on.rouge1.f1, off.rouge1.f1),
        ("ROUGE-2 (F1)", on.rouge2.f1, off.rouge2.f1),
        ("ROUGE-L (F1)", on.rouge_l.f1, off.rouge_l.f1),
        ("BLEU", on.bleu, off.bleu),
        ("COSINE", on.cosine, off.cosine),
        ("recall@1", on.recall_at_1, off.recall_at_1),
    ] {
        let _ = writeln!(out, "{:<14} {:>18.4} {:>18.4}", name, scale.apply(a), scale.apply(b));
    }
    let _ = writeln!(out, "{:<14} {:>18} {:>18}", "examples", on.n_examples, off.n_examples);
    out
}
