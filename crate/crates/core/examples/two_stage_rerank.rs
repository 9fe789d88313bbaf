//! Stage I likes a keyword-stuffed distractor; the pair scorer does not.

use std::collections::HashMap;

use lectern_core::embedding::{EmbeddingProvider, HashEmbedder};
use lectern_core::index::FlatIndex;
use lectern_core::rerank::{format_pair, rerank, LexicalScorer, PairScorer};

fn main() {
    let docs: HashMap<String, String> = [
        ("true", "a kernel slides over the image computing local features"),
        ("distractor", "kernel image kernel image kernel image kernel trick"),
        ("other", "pooling shrinks feature maps"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v.to_owned()))
    .collect();

    let embedder = HashEmbedder::default();
    let mut index = FlatIndex::new(embedder.dimension());
    for id in ["true", "distractor", "other"] {
        index.add(id, &embedder.embed(&docs[id]).unwrap()).unwrap();
    }
    index.finalize();

    let query = "what is a kernel in image features";
    let stage1 = index.search(&embedder.embed(query).unwrap(), 3).unwrap();
    println!("stage I");
    for c in &stage1 {
        println!("  {:<10} {:.4}", c.doc_id, c.stage1_score);
    }

    let ranked = rerank(query, &stage1, &docs, &LexicalScorer).unwrap();
    println!("stage II ({})", LexicalScorer.name());
    for c in &ranked.ranked {
        println!(
            "  {:<10} {:.4}  (stage I {:.4})",
            c.doc_id,
            c.stage2_score.unwrap(),
            c.stage1_score
        );
    }
    println!("\nscorer input: {:?}", format_pair(query, &docs["true"]).unwrap());
}
