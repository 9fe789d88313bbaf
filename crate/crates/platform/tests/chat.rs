mod common;

use common::{fixture, Harness};
use lectern_core::corpus::Corpus;
use lectern_core::tokenize::is_token_char;
use serde_json::json;

#[test]
fn answer_text_retrieves_its_own_record() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    let corpus = Corpus::load(fixture("toy_course")).unwrap();
    for r in corpus.records() {
        let body = c.post("/chat", Some(&t), json!({"question": r.answer_text})).json();
        assert_eq!(body["doc_id"], r.doc_id.as_str());
        assert_eq!(body["week"], r.week);
        assert_eq!(body["slide"], r.slide);
        assert_eq!(body["answer_text"], r.answer_text.as_str());
        assert_eq!(body["degraded"], false);
        assert_eq!(
            body["transcript_available"],
            corpus.transcript(r.week, r.slide).is_some()
        );
        assert_eq!(body["image_url"], format!("/weeks/{}/slides/{}/image", r.week, r.slide));
        assert!(body.get("audio_url").is_none());
    }
}

/// Best document per question, from the independent two-stage script.
const ORACLE: &[(&str, &str)] = &[
    ("w1s1q1", "w1s1q2"),
    ("w1s1q2", "w1s1q2"),
    ("w1s1q3", "w1s3q2"),
    ("w1s2q1", "w1s1q2"),
    ("w1s2q2", "w1s2q2"),
    ("w1s2q3", "w1s2q3"),
    ("w1s2q4", "w2s1q1"),
    ("w1s3q1", "w1s3q1"),
    ("w1s3q2", "w1s3q2"),
    ("w1s3q3", "w1s3q3"),
    ("w1s3q4", "w1s3q4"),
    ("w1s3q5", "w1s3q5"),
    ("w2s1q1", "w1s2q3"),
    ("w2s1q2", "w2s1q2"),
    ("w2s1q3", "w1s3q1"),
    ("w2s2q1", "w1s2q2"),
    ("w2s2q2", "w2s2q2"),
    ("w2s2q3", "w2s2q1"),
    ("w2s3q1", "w2s3q1"),
    ("w2s3q2", "w2s3q2"),
    ("w2s3q3", "w2s3q3"),
    ("w2s3q4", "w2s3q4"),
    ("w2s3q5", "w1s3q1"),
    ("w2s3q6", "w2s3q1"),
];

#[test]
fn questions_match_brute_force_oracle() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    let corpus = Corpus::load(fixture("toy_course")).unwrap();
    assert_eq!(ORACLE.len(), corpus.len());
    for (asked, expected) in ORACLE {
        let q = corpus.get(asked).unwrap().question_text.clone().unwrap();
        let body = c.post("/chat", Some(&t), json!({"question": q})).json();
        assert_eq!(body["doc_id"], *expected, "question of {asked}: {q:?}");
        let best = corpus.get(expected).unwrap();
        assert_eq!(
            (body["week"].as_u64(), body["slide"].as_u64()),
            (Some(best.week as u64), Some(best.slide as u64))
        );
    }
}

#[test]
fn context_is_echoed_not_used() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    let corpus = Corpus::load(fixture("toy_course")).unwrap();
    let r = &corpus.records()[0];
    let plain = c.post("/chat", Some(&t), json!({"question": r.answer_text})).json();
    let with_ctx = c
        .post(
            "/chat",
            Some(&t),
            json!({"question": r.answer_text, "week": 2, "slide": 3}),
        )
        .json();
    assert_eq!(with_ctx["doc_id"], plain["doc_id"]);
    assert_eq!(with_ctx["context"], json!({"week": 2, "slide": 3}));
    assert_eq!(plain["context"], json!({"week": null, "slide": null}));
}

#[test]
fn bad_questions() {
    let h = Harness::start();
    let c = h.client();
    let t = h.admin_token();
    for q in ["", "   ", "?!?"] {
        let r = c.post("/chat", Some(&t), json!({"question": q}));
        assert_eq!(r.status, 400, "{q:?}");
        assert_eq!(r.json()["error"], "bad_request");
    }
    assert_eq!(c.post("/chat", Some(&t), json!({"week": 1})).status, 400);
}

#[test]
fn ten_thousand_char_question() {
    let h = Harness::start_with(|cfg| cfg.max_input_chars = 2048);
    let c = h.client();
    let t = h.admin_token();
    let question = "how does gradient descent update the weights ".repeat(250);
    let question: String = question.chars().take(10_000).collect();
    assert_eq!(question.chars().count(), 10_000);
    let r = c.post("/chat", Some(&t), json!({"question": question}));
    assert_eq!(r.status, 200);
    let used = r.json()["query_used"].as_str().unwrap().to_owned();
    assert!(used.chars().count() <= 2048);
    assert!(question.starts_with(&used));
    let next = question[used.len()..].chars().next().unwrap();
    assert!(
        !(used.ends_with(is_token_char) && is_token_char(next)),
        "cut inside a token"
    );
}

#[test]
fn missing_index_is_503() {
    let h = Harness::start_with(|cfg| cfg.index_path = cfg.db_path.with_file_name("no-index"));
    let c = h.client();
    let t = h.admin_token();
    let r = c.post("/chat", Some(&t), json!({"question": "what is overfitting"}));
    assert_eq!(r.status, 503);
    assert_eq!(r.json()["error"], "index_unavailable");
    assert_eq!(c.get("/courses", Some(&t)).status, 200);
}
