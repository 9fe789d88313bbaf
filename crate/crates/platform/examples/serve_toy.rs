//! Serve the bundled toy course and walk through a short session.
//!
//! cargo run -p lectern-platform --example serve_toy            # scripted tour
//! cargo run -p lectern-platform --example serve_toy -- --hold  # keep serving

use std::path::Path;

use lectern_core::corpus::Corpus;
use lectern_core::embedding::HashEmbedder;
use lectern_platform::{spawn_background, AppState, Config, UserType};
use serde_json::{json, Value};

fn main() -> anyhow::Result<()> {
    let work = tempfile::tempdir()?;
    let corpus_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy_course");
    let index_path = work.path().join("index");
    Corpus::load(&corpus_dir)?
        .build_index(&HashEmbedder::default())?
        .save(&index_path)?;

    let config = Config {
        corpus_dir,
        index_path,
        db_path: work.path().join("users.db"),
        ..Config::default()
    };
    let state = AppState::from_config(config)?;
    state.users().create("admin", "admin", UserType::Admin)?;
    let server = spawn_background(state)?;
    println!("serving on http://{}  (login admin/admin)", server.addr());

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let post = |path: &str, token: Option<&str>, body: Value| -> anyhow::Result<Value> {
        let mut req = agent.post(&server.url(path));
        if let Some(t) = token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        Ok(req.send_json(body)?.into_body().read_json()?)
    };
    let get = |path: &str, token: &str| -> anyhow::Result<Value> {
        Ok(agent
            .get(&server.url(path))
            .header("Authorization", &format!("Bearer {token}"))
            .call()?
            .into_body()
            .read_json()?)
    };

    let login = post("/login", None, json!({"username": "admin", "password": "admin"}))?;
    let token = login["token"].as_str().unwrap_or_default().to_owned();
    println!("POST /login -> token {}...", &token[..8]);
    println!("GET /courses -> {}", get("/courses", &token)?);
    println!("GET /courses/ml101/weeks -> {}", get("/courses/ml101/weeks", &token)?);
    println!("GET /weeks/2/slides -> {}", get("/weeks/2/slides", &token)?);

    for q in ["what does the learning rate control", "how can we detect overfitting"] {
        let r = post("/chat", Some(&token), json!({"question": q, "week": 1, "slide": 1}))?;
        println!(
            "\nQ: {q}\nA: {}\n   -> {} (week {}, slide {})",
            r["answer_text"], r["doc_id"], r["week"], r["slide"]
        );
    }

    let created = post(
        "/user",
        Some(&token),
        json!({"username": "student", "password": "pw", "user_type": "regular"}),
    )?;
    println!("\nPOST /user -> {created}");
    println!("GET /users/all -> {}", get("/users/all", &token)?);

    if std::env::args().any(|a| a == "--hold") {
        println!("\nholding; Ctrl-C to stop");
        loop {
            std::thread::park();
        }
    }
    Ok(())
}
