mod common;

use std::fs;

use common::{fixture, Harness};
use lectern_core::embedding::fnv1a64;
use serde_json::json;

#[test]
fn course_and_week_listing() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    assert_eq!(
        c.get("/courses", Some(&t)).json(),
        json!([{"course_id": "ml101", "title": "Introduction to Machine Learning"}])
    );
    assert_eq!(c.get("/courses/ml101/weeks", Some(&t)).json(), json!([1, 2]));
    assert_eq!(c.get("/courses/cs999/weeks", Some(&t)).status, 404);
}

#[test]
fn slide_listing_marks_transcripts() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    let week2 = c.get("/weeks/2/slides", Some(&t)).json();
    let slides: Vec<_> = week2
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["slide"].as_u64().unwrap())
        .collect();
    assert_eq!(slides, [1, 2, 3, 4]);
    assert_eq!(
        week2[3],
        json!({"week": 2, "slide": 4, "image_url": "/weeks/2/slides/4/image", "transcript_available": false})
    );
    assert_eq!(week2[0]["transcript_available"], true);
    assert_eq!(c.get("/weeks/9/slides", Some(&t)).status, 404);
    assert_eq!(c.get("/weeks/x/slides", Some(&t)).status, 404);
}

#[test]
fn transcript_endpoint() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    let r = c.get("/weeks/1/slides/2/transcript", Some(&t));
    assert_eq!(r.status, 200);
    let body = r.json();
    assert_eq!(body["week"], 1);
    assert_eq!(body["slide"], 2);
    let corpus = lectern_core::Corpus::load(fixture("toy_course")).unwrap();
    assert_eq!(body["text"], corpus.transcript(1, 2).unwrap());
    assert!(body.get("audio_url").is_none());

    // null TTS: asking for audio still never issues an id
    let r = c.get("/weeks/1/slides/2/transcript?audio=true", Some(&t));
    assert!(r.json().get("audio_url").is_none());

    assert_eq!(c.get("/weeks/2/slides/4/transcript", Some(&t)).status, 404);
    assert_eq!(c.get("/weeks/2/slides/9/transcript", Some(&t)).status, 404);
}

#[test]
fn image_bytes_match_disk() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    for (w, s) in [(1, 1), (1, 3), (2, 4)] {
        let r = c.get(&format!("/weeks/{w}/slides/{s}/image"), Some(&t));
        assert_eq!(r.status, 200);
        assert_eq!(r.header("content-type"), Some("image/png"));
        let disk = fs::read(fixture("toy_course").join(format!("weeks/week_{w:02}/slide_{s:02}.png"))).unwrap();
        assert_eq!(fnv1a64(&r.bytes), fnv1a64(&disk));
        assert_eq!(r.bytes, disk);
    }
    assert_eq!(c.get("/weeks/3/slides/1/image", Some(&t)).status, 404);
}

#[test]
fn missing_corpus_is_503() {
    let h = Harness::start_with(|cfg| cfg.corpus_dir = cfg.db_path.with_file_name("no-such-course"));
    let c = h.client();
    let t = h.admin_token();
    let r = c.get("/courses", Some(&t));
    assert_eq!(r.status, 503);
    assert_eq!(r.json()["error"], "corpus_unavailable");
}
