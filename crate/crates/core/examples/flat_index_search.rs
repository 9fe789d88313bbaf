//! Exact inner-product search over a small slide-note index.

use lectern_core::embedding::{EmbeddingProvider, HashEmbedder};
use lectern_core::index::FlatIndex;

const NOTES: &[(&str, &str)] = &[
    ("lr", "The learning rate scales every gradient step."),
    ("momentum", "Momentum accumulates past gradients to smooth updates."),
    (
        "overfit",
        "Overfitting means low training loss but high validation loss.",
    ),
    ("dropout", "Dropout randomly zeroes units during training."),
    ("pooling", "Max pooling keeps the largest value in each window."),
    ("kernel", "A convolution kernel slides over the image."),
];

fn main() {
    let embedder = HashEmbedder::new(64);
    let mut index = FlatIndex::new(embedder.dimension());
    for (id, text) in NOTES {
        index.add(*id, &embedder.embed(text).unwrap()).unwrap();
    }
    index.finalize();
    println!("{} rows, d = {}", index.len(), index.dimension());

    let query = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "how big is each gradient step".into());
    let q = embedder.embed(&query).unwrap();
    println!("query: {query}");
    for (rank, hit) in index.search(&q, 3).unwrap().iter().enumerate() {
        println!("  {}. {:<9} {:.4}", rank + 1, hit.doc_id, hit.stage1_score);
    }

    // k larger than the index returns everything.
    println!("k = 50 returns {} rows", index.search(&q, 50).unwrap().len());
}
