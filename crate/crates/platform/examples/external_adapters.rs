//! Point the service at external scorer, generator and TTS services.
//!
//! Three tiny stand-in services run in-process; the service talks to them
//! over HTTP exactly as it would to real model servers.

use std::net::SocketAddr;
use std::path::Path;

use axum::routing::post;
use axum::{Json, Router};
use lectern_core::corpus::Corpus;
use lectern_core::embedding::HashEmbedder;
use lectern_platform::config::{GeneratorMode, RerankMode, TtsMode};
use lectern_platform::{spawn_background, AppState, Config, UserType};
use serde_json::{json, Value};

async fn score(Json(body): Json<Value>) -> Json<Value> {
    // Counts shared words across the [SEP] boundary.
    let input = body["input"].as_str().unwrap_or_default().to_lowercase();
    let (q, c) = input.split_once(" [sep] ").unwrap_or((&input, ""));
    let shared = q
        .split_whitespace()
        .filter(|w| c.split_whitespace().any(|x| x == *w))
        .count();
    Json(json!({"score": shared as f64}))
}

async fn generate(Json(body): Json<Value>) -> Json<Value> {
    Json(json!({"text": format!("Short answer: {}", body["context"].as_str().unwrap_or_default())}))
}

async fn tts(Json(_): Json<Value>) -> Vec<u8> {
    b"RIFF\x24\x00\x00\x00WAVEfmt ".to_vec()
}

fn main() -> anyhow::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let stubs: SocketAddr = listener.local_addr()?;
    let app = Router::new()
        .route("/score", post(score))
        .route("/generate", post(generate))
        .route("/tts", post(tts));
    rt.spawn(async move { axum::serve(listener, app).await });

    let work = tempfile::tempdir()?;
    let corpus_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy_course");
    let index_path = work.path().join("index");
    Corpus::load(&corpus_dir)?
        .build_index(&HashEmbedder::default())?
        .save(&index_path)?;

    let mut config = Config {
        corpus_dir,
        index_path,
        db_path: work.path().join("users.db"),
        ..Config::default()
    };
    config.rerank.mode = RerankMode::External;
    config.rerank.url = Some(format!("http://{stubs}/score"));
    config.generator.mode = GeneratorMode::External;
    config.generator.url = Some(format!("http://{stubs}/generate"));
    config.tts.mode = TtsMode::External;
    config.tts.url = Some(format!("http://{stubs}/tts"));

    let state = AppState::from_config(config)?;
    state.users().create("admin", "admin", UserType::Admin)?;
    let server = spawn_background(state)?;

    let token: String = ureq::post(&server.url("/login"))
        .send_json(json!({"username": "admin", "password": "admin"}))?
        .into_body()
        .read_json::<Value>()?["token"]
        .as_str()
        .unwrap_or_default()
        .to_owned();
    let auth = format!("Bearer {token}");

    let reply: Value = ureq::post(&server.url("/chat"))
        .header("Authorization", &auth)
        .send_json(json!({"question": "what is a label in supervised learning", "want_audio": true}))?
        .into_body()
        .read_json()?;
    println!("{}", serde_json::to_string_pretty(&reply)?);

    let audio = ureq::get(&server.url(reply["audio_url"].as_str().unwrap_or("/audio/none")))
        .header("Authorization", &auth)
        .call()?
        .into_body()
        .read_to_vec()?;
    println!(
        "audio: {} bytes, starts with {:?}",
        audio.len(),
        String::from_utf8_lossy(&audio[..4])
    );
    Ok(())
}
