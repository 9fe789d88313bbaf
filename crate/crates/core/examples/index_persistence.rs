//! Save an index, inspect the files, and load it back.

use std::fs;

use lectern_core::embedding::{EmbeddingProvider, HashEmbedder};
use lectern_core::index::{FlatIndex, IndexError, MANIFEST_FILE, VECTORS_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = HashEmbedder::new(8);
    let mut index = FlatIndex::new(8);
    for (id, text) in [
        ("a", "neural networks"),
        ("b", "decision trees"),
        ("c", "support vector machines"),
    ] {
        index.add(id, &embedder.embed(text)?)?;
    }
    index.finalize();

    let dir = tempfile::tempdir()?;
    index.save(dir.path())?;
    println!(
        "{}: {}",
        MANIFEST_FILE,
        fs::read_to_string(dir.path().join(MANIFEST_FILE))?
    );
    let bytes = fs::read(dir.path().join(VECTORS_FILE))?;
    println!("{}: {} bytes = 3 rows x 8 dims x 4", VECTORS_FILE, bytes.len());

    let loaded = FlatIndex::load(dir.path())?;
    let q = embedder.embed("tree based models")?;
    assert_eq!(index.search(&q, 3)?, loaded.search(&q, 3)?);
    println!("reloaded index answers identically");

    fs::write(dir.path().join(VECTORS_FILE), &bytes[..bytes.len() - 4])?;
    match FlatIndex::load(dir.path()) {
        Err(e @ IndexError::CorruptManifest(_)) => println!("after truncation: {e}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
