//! Ask the toy course a question end to end.
//!
//! cargo run -p lectern-core --example pipeline_retrieve -- "why use dropout"

use lectern_core::corpus::Corpus;
use lectern_core::embedding::HashEmbedder;
use lectern_core::pipeline::{GenerateError, GeneratorAdapter, Pipeline, PipelineConfig};
use lectern_core::rerank::LexicalScorer;

/// Prefixes the retrieved answer, standing in for a real generator.
struct Cite;

impl GeneratorAdapter for Cite {
    fn generate(&self, _query: &str, context: &str) -> Result<String, GenerateError> {
        Ok(format!("From the slides: {context}"))
    }

    fn name(&self) -> &str {
        "cite"
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Corpus::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/toy_course"))?;
    let embedder = HashEmbedder::default();
    let index = corpus.build_index(&embedder)?;
    let question = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "why does dropout help".into());

    let pipeline = Pipeline::new(&index, &corpus, &embedder, &LexicalScorer);
    let cfg = PipelineConfig {
        final_n: 3,
        ..Default::default()
    };
    let resp = pipeline.retrieve(&question, &cfg)?;
    println!("Q: {}", resp.query_used);
    println!("A: {}", resp.answer_text);
    println!("   week {} slide {} ({:?})", resp.week, resp.slide, resp.image_ref);
    for c in &resp.candidates {
        println!(
            "   {:<8} stage I {:.4}  stage II {:.4}",
            c.doc_id,
            c.stage1_score,
            c.stage2_score.unwrap_or(f64::NAN)
        );
    }

    let with_gen = Pipeline::new(&index, &corpus, &embedder, &LexicalScorer).with_generator(&Cite);
    println!(
        "\n{}",
        with_gen.retrieve(&question, &PipelineConfig::default())?.answer_text
    );

    let long = "explain regularization ".repeat(300);
    let cfg = PipelineConfig {
        max_input_chars: 64,
        ..Default::default()
    };
    let resp = pipeline.retrieve(&long, &cfg)?;
    println!("\n{}-char question cut to {:?}", long.len(), resp.query_used);
    Ok(())
}
