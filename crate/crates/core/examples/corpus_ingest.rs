//! Load a course directory and print what the service would expose.
//!
//! cargo run -p lectern-core --example corpus_ingest -- [course_dir]

use std::path::PathBuf;

use lectern_core::corpus::Corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_course"));
    let corpus = Corpus::load(&dir)?;
    println!("{} \"{}\": {} records", corpus.course_id, corpus.title, corpus.len());

    for week in corpus.weeks() {
        println!("week {week}");
        for s in corpus.slides(week) {
            let n = corpus
                .records()
                .iter()
                .filter(|r| (r.week, r.slide) == (week, s.slide))
                .count();
            println!(
                "  slide {:>2}  {} QA  image: {:<5} transcript: {}",
                s.slide,
                n,
                s.image_ref.is_some(),
                s.transcript_available
            );
        }
    }

    let issues = corpus.validate();
    if issues.is_empty() {
        println!("no issues");
    }
    for issue in issues {
        println!("issue: {issue}");
    }
    Ok(())
}
