#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::thread;

use axum::Router;
use lectern_core::corpus::Corpus;
use lectern_core::embedding::HashEmbedder;
use lectern_platform::config::Config;
use lectern_platform::{spawn_background, AppState, RunningServer, UserType};
use serde_json::Value;
use tempfile::TempDir;
use tokio::sync::oneshot;

pub const ADMIN: &str = "admin";
pub const ADMIN_PW: &str = "admin-pw";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

/// A running service over the toy course with one seeded admin.
pub struct Harness {
    pub dir: TempDir,
    pub config: Config,
    pub server: RunningServer,
}

pub fn toy_config(dir: &Path) -> Config {
    let corpus_dir = fixture("toy_course");
    let index_path = dir.join("index");
    if !index_path.join("manifest.json").exists() {
        let corpus = Corpus::load(&corpus_dir).unwrap();
        corpus
            .build_index(&HashEmbedder::default())
            .unwrap()
            .save(&index_path)
            .unwrap();
    }
    Config {
        corpus_dir,
        index_path,
        db_path: dir.join("users.db"),
        adapter_timeout_ms: 2_000,
        ..Config::default()
    }
}

impl Harness {
    pub fn start() -> Self {
        Self::start_with(|_| {})
    }

    pub fn start_with(tweak: impl FnOnce(&mut Config)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        tweak(&mut config);
        let state = AppState::from_config(config.clone()).unwrap();
        if state.users().find_by_name(ADMIN).unwrap().is_none() {
            state.users().create(ADMIN, ADMIN_PW, UserType::Admin).unwrap();
        }
        let server = spawn_background(state).unwrap();
        Self { dir, config, server }
    }

    /// Stops the server and starts a fresh one on the same files.
    pub fn restart(self) -> Self {
        let Harness { dir, config, server } = self;
        drop(server);
        let state = AppState::from_config(config.clone()).unwrap();
        let server = spawn_background(state).unwrap();
        Self { dir, config, server }
    }

    pub fn client(&self) -> Client {
        Client::new(self.server.addr())
    }

    pub fn admin_token(&self) -> String {
        self.client().login(ADMIN, ADMIN_PW).expect("admin login")
    }
}

pub struct Reply {
    pub status: u16,
    pub headers: Vec<(String, String)>,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| {
            panic!(
                "status {} body not JSON ({e}): {:?}",
                self.status,
                String::from_utf8_lossy(&self.bytes)
            )
        })
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

pub struct Client {
    base: String,
    agent: ureq::Agent,
}

impl Client {
    pub fn new(addr: SocketAddr) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .max_idle_connections(0)
            .build()
            .into();
        Self {
            base: format!("http://{addr}"),
            agent,
        }
    }

    pub fn call(&self, method: &str, path: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let url = format!("{}{}", self.base, path);
        let auth = token.map(|t| format!("Bearer {t}"));
        let resp = match method {
            "GET" | "DELETE" => {
                let mut req = if method == "GET" {
                    self.agent.get(&url)
                } else {
                    self.agent.delete(&url)
                };
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                req.call()
            }
            _ => {
                let mut req = match method {
                    "POST" => self.agent.post(&url),
                    "PUT" => self.agent.put(&url),
                    other => panic!("unsupported method {other}"),
                };
                if let Some(a) = &auth {
                    req = req.header("Authorization", a);
                }
                match body {
                    Some(b) => req.send_json(b),
                    None => req.send_empty(),
                }
            }
        }
        .unwrap_or_else(|e| panic!("{method} {path}: {e}"));
        let status = resp.status().as_u16();
        let headers = resp
            .headers()
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_str().unwrap_or_default().to_owned()))
            .collect();
        let bytes = resp.into_body().read_to_vec().unwrap();
        Reply { status, headers, bytes }
    }

    pub fn get(&self, path: &str, token: Option<&str>) -> Reply {
        self.call("GET", path, token, None)
    }

    pub fn post(&self, path: &str, token: Option<&str>, body: Value) -> Reply {
        self.call("POST", path, token, Some(body))
    }

    pub fn login(&self, username: &str, password: &str) -> Option<String> {
        let r = self.post(
            "/login",
            None,
            serde_json::json!({"username": username, "password": password}),
        );
        (r.status == 200).then(|| r.json()["token"].as_str().unwrap().to_owned())
    }
}

/// A scripted HTTP service on its own runtime thread.
pub struct Stub {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<()>>,
}

impl Stub {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn_stub(app: Router) -> Stub {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::spawn(move || {
        rt.block_on(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .unwrap();
        })
    });
    Stub {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    }
}

/// An address nothing listens on.
pub fn dead_url() -> String {
    let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    drop(l);
    format!("http://{addr}/")
}
