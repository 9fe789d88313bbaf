mod common;

use std::fs;
use std::io::Write;
use std::process::{Command, Output, Stdio};

use common::fixture;
use lectern_core::corpus::Corpus;
use lectern_core::index::FlatIndex;
use lectern_platform::UserStore;

fn lectern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lectern"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("LECTERN_PASSWORD")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dest);
        } else {
            fs::copy(entry.path(), dest).unwrap();
        }
    }
}

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_reports_clean_course() {
    let out = stdout(&lectern(&["ingest", path(&fixture("toy_course")), "--strict"]));
    assert!(out.contains("ml101"), "{out}");
    assert!(out.contains("24 records"), "{out}");
    assert!(out.contains("0 issue(s)"), "{out}");
}

#[test]
fn ingest_strict_fails_on_issues() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture("toy_course"), dir.path());
    let qa = dir.path().join("qa.jsonl");
    let text = fs::read_to_string(&qa).unwrap();
    fs::write(
        &qa,
        text + "{\"id\":\"w3s1q1\",\"week\":3,\"slide\":1,\"answer\":\"...\",\"qtype\":\"open\"}\n",
    )
    .unwrap();

    let lax = lectern(&["ingest", path(dir.path())]);
    let out = stdout(&lax);
    assert!(out.contains("2 issue(s)"), "{out}");
    let strict = lectern(&["ingest", path(dir.path()), "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
    let broken = lectern(&["ingest", path(&dir.path().join("nope"))]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("error"));
}

#[test]
fn build_index_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("idx");
    let out = stdout(&lectern(&[
        "build-index",
        path(&fixture("toy_course")),
        "--out",
        path(&idx),
        "--dim",
        "64",
    ]));
    assert!(out.contains("indexed 24 records (dim 64)"), "{out}");
    let index = FlatIndex::load(&idx).unwrap();
    assert_eq!((index.len(), index.dimension()), (24, 64));
    assert!(idx.join("source.json").is_file());

    let corpus = Corpus::load(fixture("toy_course")).unwrap();
    let target = &corpus.records()[5];
    let out = stdout(&lectern(&["query", path(&idx), &target.answer_text, "--top", "3"]));
    let first = out.lines().nth(1).unwrap();
    assert!(first.split_whitespace().nth(1) == Some(target.doc_id.as_str()), "{out}");
    assert_eq!(out.lines().count(), 4);

    let plain = stdout(&lectern(&[
        "query",
        path(&idx),
        &target.answer_text,
        "--no-rerank",
        "--k",
        "2",
    ]));
    assert!(plain.lines().nth(1).unwrap().contains(" - "), "{plain}");
    assert_eq!(plain.lines().count(), 3);
}

#[test]
fn query_without_source_needs_corpus_flag() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Corpus::load(fixture("toy_course")).unwrap();
    corpus
        .build_index(&lectern_core::HashEmbedder::default())
        .unwrap()
        .save(dir.path())
        .unwrap();
    let failed = lectern(&["query", path(dir.path()), "gradient"]);
    assert!(!failed.status.success());
    let out = stdout(&lectern(&[
        "query",
        path(dir.path()),
        "gradient",
        "--corpus",
        path(&fixture("toy_course")),
    ]));
    assert!(out.lines().count() > 1);
}

#[test]
fn eval_ablation_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("idx");
    let course = fixture("ablation_course");
    stdout(&lectern(&["build-index", path(&course), "--out", path(&idx)]));
    let json_path = dir.path().join("report.json");
    let out = stdout(&lectern(&[
        "eval",
        path(&course),
        "--idx",
        path(&idx),
        "--ablation",
        "--json",
        path(&json_path),
    ]));
    assert!(
        out.contains("with reranker") && out.contains("without reranker"),
        "{out}"
    );
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    let on = report["with_rerank"]["rouge1"]["f1"].as_f64().unwrap();
    let off = report["without_rerank"]["rouge1"]["f1"].as_f64().unwrap();
    assert!(on > off);

    let single = stdout(&lectern(&["eval", path(&course), "--idx", path(&idx), "--percent"]));
    assert!(single.contains("rerank=on k=10 scorer=lexical (n=10)"), "{single}");
    assert!(single.contains("100.0000"), "{single}");
}

#[test]
fn user_admin_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("users.db");
    let mut child = Command::new(env!("CARGO_BIN_EXE_lectern"))
        .args(["user", "add", "root", "--type", "admin", "--db", path(&db)])
        .env_remove("LECTERN_PASSWORD")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"s3cret\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());

    let added = Command::new(env!("CARGO_BIN_EXE_lectern"))
        .args(["user", "add", "student", "--db", path(&db)])
        .env("LECTERN_PASSWORD", "pw2")
        .output()
        .unwrap();
    assert!(added.status.success());

    let store = UserStore::open(&db).unwrap();
    assert!(store.verify("root", "s3cret").unwrap().is_some());
    assert!(store.verify("student", "pw2").unwrap().is_some());
    drop(store);

    let listed = stdout(&lectern(&["user", "list", "--db", path(&db)]));
    assert!(
        listed.contains("root") && listed.contains("admin") && listed.contains("student"),
        "{listed}"
    );
    let admins = stdout(&lectern(&["user", "list", "--type", "admin", "--db", path(&db)]));
    assert!(!admins.contains("student"));

    stdout(&lectern(&["user", "del", "student", "--db", path(&db)]));
    assert!(!stdout(&lectern(&["user", "list", "--db", path(&db)])).contains("student"));
    assert!(!lectern(&["user", "del", "student", "--db", path(&db)]).status.success());
}

#[test]
fn user_store_via_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("lectern.json");
    fs::write(&cfg, r#"{"db_path": "state/users.db"}"#).unwrap();
    fs::create_dir(dir.path().join("state")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_lectern"))
        .args(["user", "add", "ops", "--type", "admin", "--config", path(&cfg)])
        .env("LECTERN_PASSWORD", "pw")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("state/users.db").is_file());
}
