//! Hash-embed a few sentences and compare them.
//!
//! cargo run -p lectern-core --example embed_and_normalize -- "optional text"

use lectern_core::embedding::{fnv1a64, EmbeddingProvider, EmbeddingVector, HashEmbedder};
use lectern_core::tokenize::tokenize;

fn main() {
    let embedder = HashEmbedder::default();
    let extra: Vec<String> = std::env::args().skip(1).collect();
    let mut texts = vec![
        "Gradient descent follows the negative gradient of the loss.".to_owned(),
        "The loss shrinks when weights move against the gradient.".to_owned(),
        "Pooling layers downsample feature maps.".to_owned(),
    ];
    if !extra.is_empty() {
        texts.push(extra.join(" "));
    }

    let first = &texts[0];
    println!("tokens of {first:?}:");
    for token in tokenize(first) {
        let h = fnv1a64(token.as_bytes());
        let sign = if h >> 63 == 0 { '+' } else { '-' };
        println!("  {token:<10} bucket {:>3} {sign}", h % embedder.dimension() as u64);
    }

    let vectors: Vec<EmbeddingVector> = texts
        .iter()
        .map(|t| embedder.embed(t).expect("text has tokens"))
        .collect();
    println!("\nd = {}, every vector has norm 1:", embedder.dimension());
    for (t, v) in texts.iter().zip(&vectors) {
        let nonzero = v.as_slice().iter().filter(|x| **x != 0.0).count();
        println!("  |v| = {:.6}  {nonzero:>2} buckets  {t}", v.norm());
    }

    println!("\npairwise inner products:");
    for (i, a) in vectors.iter().enumerate() {
        let row: Vec<String> = vectors.iter().map(|b| format!("{:6.3}", a.dot(b).unwrap())).collect();
        println!("  [{i}] {}", row.join(" "));
    }

    let raw = EmbeddingVector::new(vec![3.0, 4.0]).unwrap();
    let unit = raw.normalize().unwrap();
    println!("\n[3, 4] normalizes to {:?}", unit.as_slice());
    let zero = EmbeddingVector::new(vec![0.0, 0.0]).unwrap();
    println!("[0, 0] normalizes to {:?}", zero.normalize());
}
