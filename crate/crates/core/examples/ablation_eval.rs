//! Evaluate a course with and without the reranker.
//!
//! cargo run -p lectern-core --example ablation_eval -- [course_dir] [--percent]

use std::path::PathBuf;

use lectern_core::corpus::Corpus;
use lectern_core::embedding::HashEmbedder;
use lectern_core::eval::{format_ablation, run_ablation, Scale};
use lectern_core::pipeline::{Pipeline, PipelineConfig};
use lectern_core::rerank::LexicalScorer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let percent = args.iter().any(|a| a == "--percent");
    let dir = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/ablation_course"));

    let corpus = Corpus::load(&dir)?;
    let embedder = HashEmbedder::default();
    let index = corpus.build_index(&embedder)?;
    let pipeline = Pipeline::new(&index, &corpus, &embedder, &LexicalScorer);
    let report = run_ablation(&corpus, &PipelineConfig::default(), &pipeline, &embedder)?;
    let scale = if percent { Scale::Percent } else { Scale::Unit };
    print!("{}", format_ablation(&report, scale));
    Ok(())
}
