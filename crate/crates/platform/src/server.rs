//! REST service: users and sessions, course content, chat and audio.

use std::collections::{HashMap, VecDeque};
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context};
use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE, COOKIE, SET_COOKIE};
use axum::http::request::Parts;
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tracing::{info, warn};

use lectern_core::corpus::Corpus;
use lectern_core::embedding::{EmbeddingProvider, HashEmbedder};
use lectern_core::index::FlatIndex;
use lectern_core::pipeline::{GeneratorAdapter, Passthrough, Pipeline, PipelineError};
use lectern_core::rerank::{LexicalScorer, PairScorer, RerankError};

use crate::adapters::{ExternalEmbedder, ExternalGenerator, ExternalScorer, ExternalTts, HttpClient, TtsAdapter};
use crate::config::{Config, EmbedderMode, GeneratorMode, RerankMode, TtsMode};
use crate::error::ApiError;
use crate::session::SessionStore;
use crate::store::{User, UserStore, UserType, UserUpdate};

pub const SESSION_COOKIE: &str = "session";
const AUDIO_CACHE_CAP: usize = 256;

struct AudioEntry {
    text: String,
    wav: Option<Arc<Vec<u8>>>,
}

#[derive(Default)]
struct AudioCache {
    entries: HashMap<String, AudioEntry>,
    order: VecDeque<String>,
}

impl AudioCache {
    fn insert(&mut self, id: String, entry: AudioEntry) {
        if self.order.len() >= AUDIO_CACHE_CAP {
            if let Some(old) = self.order.pop_front() {
                self.entries.remove(&old);
            }
        }
        self.order.push_back(id.clone());
        self.entries.insert(id, entry);
    }
}

struct Inner {
    config: Config,
    users: UserStore,
    sessions: SessionStore,
    corpus: Option<Corpus>,
    index: Option<FlatIndex>,
    embedder: Box<dyn EmbeddingProvider>,
    scorer: Box<dyn PairScorer>,
    generator: Box<dyn GeneratorAdapter>,
    tts: Option<Box<dyn TtsAdapter>>,
    audio: Mutex<AudioCache>,
}

/// Shared, cheaply clonable service state.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Opens the user store and loads corpus and index.
    ///
    /// A missing corpus or index is logged and leaves the service up: content
    /// endpoints answer 503 without a corpus, `/chat` answers 503 without an
    /// index. An index that disagrees with the corpus or the embedder is an
    /// error.
    pub fn from_config(config: Config) -> anyhow::Result<Self> {
        config.check()?;
        if let Some(parent) = config.db_path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let users = UserStore::open(&config.db_path)
            .with_context(|| format!("opening user store {}", config.db_path.display()))?;

        let corpus = match Corpus::load(&config.corpus_dir) {
            Ok(c) => Some(c),
            Err(e) => {
                warn!(dir = %config.corpus_dir.display(), error = %e, "corpus not loaded");
                None
            }
        };
        let index = match FlatIndex::load(&config.index_path) {
            Ok(i) => Some(i),
            Err(e) => {
                warn!(path = %config.index_path.display(), error = %e, "index not loaded; /chat unavailable");
                None
            }
        };

        let timeout = Duration::from_millis(config.adapter_timeout_ms);
        let client = |url: &Option<String>| HttpClient::new(url.clone().unwrap_or_default(), timeout);

        let embedder: Box<dyn EmbeddingProvider> = match config.embedder.mode {
            EmbedderMode::Hash => Box::new(HashEmbedder::new(config.embedder.dim)),
            EmbedderMode::External => {
                Box::new(ExternalEmbedder::new(client(&config.embedder.url), config.embedder.dim))
            }
        };
        let scorer: Box<dyn PairScorer> = match config.rerank.mode {
            RerankMode::Lexical => Box::new(LexicalScorer),
            RerankMode::External => Box::new(ExternalScorer::new(client(&config.rerank.url))),
        };
        let generator: Box<dyn GeneratorAdapter> = match config.generator.mode {
            GeneratorMode::Passthrough => Box::new(Passthrough),
            GeneratorMode::External => Box::new(ExternalGenerator::new(client(&config.generator.url))),
        };
        let tts: Option<Box<dyn TtsAdapter>> = match config.tts.mode {
            TtsMode::Null => None,
            TtsMode::External => Some(Box::new(ExternalTts::new(client(&config.tts.url)))),
        };

        if let Some(index) = &index {
            if index.dimension() != embedder.dimension() {
                bail!(
                    "index dimension {} does not match embedder dimension {}",
                    index.dimension(),
                    embedder.dimension()
                );
            }
            if let Some(corpus) = &corpus {
                if let Some(missing) = index.ids().iter().find(|id| corpus.get(id).is_none()) {
                    bail!("index document {missing:?} is not in the corpus; rebuild the index");
                }
            }
        }

        let sessions = SessionStore::new(Duration::from_secs(config.session_ttl_secs));
        Ok(Self(Arc::new(Inner {
            config,
            users,
            sessions,
            corpus,
            index,
            embedder,
            scorer,
            generator,
            tts,
            audio: Mutex::new(AudioCache::default()),
        })))
    }

    pub fn config(&self) -> &Config {
        &self.0.config
    }

    pub fn users(&self) -> &UserStore {
        &self.0.users
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.0.sessions
    }

    pub fn corpus(&self) -> Option<&Corpus> {
        self.0.corpus.as_ref()
    }

    pub fn index_loaded(&self) -> bool {
        self.0.index.is_some()
    }

    fn require_corpus(&self) -> Result<&Corpus, ApiError> {
        self.corpus().ok_or_else(|| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                "corpus_unavailable",
                "no corpus loaded",
            )
        })
    }

    fn issue_audio(&self, text: String, wav: Option<Vec<u8>>) -> String {
        let id = hex::encode(rand::random::<[u8; 16]>());
        self.0.audio.lock().insert(
            id.clone(),
            AudioEntry {
                text,
                wav: wav.map(Arc::new),
            },
        );
        id
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/login", post(login))
        .route("/logout", post(logout))
        .route("/user", post(create_user))
        .route("/user/{id}", put(update_user).delete(delete_user))
        .route("/users/{filter}", get(list_users))
        .route("/chat", post(chat))
        .route("/audio/{id}", get(audio))
        .route("/courses", get(courses))
        .route("/courses/{id}/weeks", get(weeks))
        .route("/weeks/{week}/slides", get(slides))
        .route("/weeks/{week}/slides/{slide}/image", get(slide_image))
        .route("/weeks/{week}/slides/{slide}/transcript", get(transcript))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    state: AppState,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
}

/// A server on its own runtime thread, bound to an ephemeral localhost port.
/// Dropping it shuts the server down.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<thread::JoinHandle<io::Result<()>>>,
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(handle) = self.thread.take() {
            let _ = handle.join();
        }
    }
}

pub fn spawn_background(state: AppState) -> io::Result<RunningServer> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(TcpListener::bind("127.0.0.1:0"))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = thread::Builder::new()
        .name(format!("lectern-{}", addr.port()))
        .spawn(move || {
            runtime.block_on(serve(state, listener, async {
                let _ = rx.await;
            }))
        })?;
    info!(%addr, "background server started");
    Ok(RunningServer {
        addr,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

fn parse_id<T: std::str::FromStr>(raw: &str, what: &str) -> Result<T, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::not_found(format!("unknown {what} {raw:?}")))
}

fn bearer_or_cookie(headers: &HeaderMap) -> Option<String> {
    if let Some(token) = headers
        .get(AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
    {
        return Some(token.trim().to_owned());
    }
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .find(|(name, _)| *name == SESSION_COOKIE)
        .map(|(_, value)| value.to_owned())
}

/// A request carrying a live session.
pub struct AuthUser {
    pub user: User,
    pub token: String,
}

impl FromRequestParts<AppState> for AuthUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = bearer_or_cookie(&parts.headers).ok_or_else(|| ApiError::unauthorized("missing session token"))?;
        let session = state
            .sessions()
            .authenticate(&token)
            .ok_or_else(|| ApiError::unauthorized("invalid or expired session"))?;
        let user = state
            .users()
            .get(session.user_id)?
            .ok_or_else(|| ApiError::unauthorized("invalid or expired session"))?;
        Ok(Self { user, token })
    }
}

/// A request from a logged-in admin.
pub struct AdminUser(pub User);

impl FromRequestParts<AppState> for AdminUser {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let auth = AuthUser::from_request_parts(parts, state).await?;
        if auth.user.user_type != UserType::Admin {
            return Err(ApiError::forbidden());
        }
        Ok(Self(auth.user))
    }
}

#[derive(Deserialize)]
struct LoginRequest {
    username: String,
    password: String,
}

#[derive(Serialize)]
struct LoginResponse {
    token: String,
    user_id: i64,
    username: String,
    user_type: UserType,
    expires_at: u64,
}

async fn login(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: LoginRequest = parse_body(&body)?;
    let users = state.clone();
    let user = tokio::task::spawn_blocking(move || users.users().verify(&req.username, &req.password))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??
        .ok_or_else(|| ApiError::unauthorized("invalid credentials"))?;
    let session = state.sessions().issue(user.user_id);
    let cookie = format!(
        "{SESSION_COOKIE}={}; HttpOnly; Path=/; SameSite=Strict; Max-Age={}",
        session.token,
        state.sessions().ttl().as_secs()
    );
    let body = LoginResponse {
        token: session.token.clone(),
        user_id: user.user_id,
        username: user.username,
        user_type: user.user_type,
        expires_at: session.expires_at_unix(),
    };
    let mut resp = Json(body).into_response();
    resp.headers_mut().insert(
        SET_COOKIE,
        HeaderValue::from_str(&cookie).map_err(|e| ApiError::internal(e.to_string()))?,
    );
    Ok(resp)
}

async fn logout(State(state): State<AppState>, auth: AuthUser) -> Response {
    state.sessions().revoke(&auth.token);
    let mut resp = StatusCode::NO_CONTENT.into_response();
    resp.headers_mut().insert(
        SET_COOKIE,
        HeaderValue::from_static("session=; HttpOnly; Path=/; SameSite=Strict; Max-Age=0"),
    );
    resp
}

#[derive(Deserialize)]
struct CreateUser {
    username: String,
    password: String,
    user_type: UserType,
}

async fn create_user(State(state): State<AppState>, _admin: AdminUser, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateUser = parse_body(&body)?;
    let user = tokio::task::spawn_blocking(move || state.users().create(&req.username, &req.password, req.user_type))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(user)).into_response())
}

async fn update_user(
    State(state): State<AppState>,
    _admin: AdminUser,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<User>, ApiError> {
    let id: i64 = parse_id(&id, "user")?;
    let update: UserUpdate = parse_body(&body)?;
    let user = tokio::task::spawn_blocking(move || state.users().update(id, &update))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(user))
}

async fn delete_user(
    State(state): State<AppState>,
    _admin: AdminUser,
    Path(id): Path<String>,
) -> Result<StatusCode, ApiError> {
    let id: i64 = parse_id(&id, "user")?;
    state.users().delete(id)?;
    state.sessions().revoke_user(id);
    Ok(StatusCode::NO_CONTENT)
}

async fn list_users(
    State(state): State<AppState>,
    _admin: AdminUser,
    Path(filter): Path<String>,
) -> Result<Json<Vec<User>>, ApiError> {
    let filter = match filter.as_str() {
        "all" => None,
        "admins" => Some(UserType::Admin),
        "regular" => Some(UserType::Regular),
        other => return Err(ApiError::not_found(format!("unknown user listing {other:?}"))),
    };
    Ok(Json(state.users().list(filter)?))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct SlideContext {
    pub week: Option<u32>,
    pub slide: Option<u32>,
}

#[derive(Debug, Deserialize)]
pub struct ChatRequest {
    pub question: String,
    #[serde(default)]
    pub week: Option<u32>,
    #[serde(default)]
    pub slide: Option<u32>,
    #[serde(default)]
    pub want_audio: bool,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatResponse {
    pub answer_text: String,
    pub doc_id: String,
    pub week: u32,
    pub slide: u32,
    pub image_url: Option<String>,
    pub transcript_available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_url: Option<String>,
    pub degraded: bool,
    pub query_used: String,
    pub stage1_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage2_score: Option<f64>,
    /// The week/slide the client said it was on, echoed back.
    pub context: SlideContext,
}

fn image_url(week: u32, slide: u32) -> String {
    format!("/weeks/{week}/slides/{slide}/image")
}

fn pipeline_error(e: PipelineError) -> ApiError {
    match e {
        PipelineError::EmptyQuery => ApiError::bad_request("question has no searchable words"),
        PipelineError::Embed(e) => ApiError::new(StatusCode::BAD_GATEWAY, "embedder_failure", e.to_string()),
        PipelineError::Rerank(e @ RerankError::ScorerFailure { .. }) => {
            ApiError::new(StatusCode::BAD_GATEWAY, "scorer_failure", e.to_string())
        }
        other => ApiError::internal(other.to_string()),
    }
}

fn run_chat(state: &AppState, req: ChatRequest) -> Result<ChatResponse, ApiError> {
    let inner = &*state.0;
    let (Some(index), Some(corpus)) = (&inner.index, &inner.corpus) else {
        return Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "index_unavailable",
            "no index loaded",
        ));
    };
    let pipeline = Pipeline::new(index, corpus, inner.embedder.as_ref(), inner.scorer.as_ref())
        .with_generator(inner.generator.as_ref());
    let resp = pipeline
        .retrieve(&req.question, &inner.config.pipeline())
        .map_err(pipeline_error)?;

    let mut degraded = resp.degraded;
    let mut audio_url = None;
    if req.want_audio {
        match &inner.tts {
            None => degraded = true,
            Some(tts) => {
                let wav = match tts.synthesize(&resp.answer_text) {
                    Ok(bytes) => Some(bytes),
                    Err(e) => {
                        warn!(error = %e, "speech synthesis failed; answering with text only");
                        degraded = true;
                        None
                    }
                };
                let id = state.issue_audio(resp.answer_text.clone(), wav);
                audio_url = Some(format!("/audio/{id}"));
            }
        }
    }

    Ok(ChatResponse {
        doc_id: resp.best.doc_id.clone(),
        week: resp.week,
        slide: resp.slide,
        image_url: corpus
            .image_path(resp.week, resp.slide)
            .map(|_| image_url(resp.week, resp.slide)),
        transcript_available: corpus.transcript(resp.week, resp.slide).is_some(),
        audio_url,
        degraded,
        query_used: resp.query_used,
        stage1_score: resp.best.stage1_score,
        stage2_score: resp.best.stage2_score,
        answer_text: resp.answer_text,
        context: SlideContext {
            week: req.week,
            slide: req.slide,
        },
    })
}

async fn chat(State(state): State<AppState>, _auth: AuthUser, body: Bytes) -> Result<Json<ChatResponse>, ApiError> {
    let req: ChatRequest = parse_body(&body)?;
    let resp = tokio::task::spawn_blocking(move || run_chat(&state, req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(resp))
}

async fn audio(State(state): State<AppState>, _auth: AuthUser, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (text, cached) = {
        let cache = state.0.audio.lock();
        let entry = cache
            .entries
            .get(&id)
            .ok_or_else(|| ApiError::not_found(format!("unknown audio id {id:?}")))?;
        (entry.text.clone(), entry.wav.clone())
    };
    let wav = match cached {
        Some(wav) => wav,
        None => {
            let worker = state.clone();
            let bytes = tokio::task::spawn_blocking(move || match &worker.0.tts {
                Some(tts) => tts.synthesize(&text).map_err(|e| e.to_string()),
                None => Err("no speech synthesis configured".to_owned()),
            })
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
            .map_err(|e| ApiError::new(StatusCode::BAD_GATEWAY, "tts_failure", e))?;
            let bytes = Arc::new(bytes);
            if let Some(entry) = state.0.audio.lock().entries.get_mut(&id) {
                entry.wav = Some(bytes.clone());
            }
            bytes
        }
    };
    Ok(([(CONTENT_TYPE, "audio/wav")], wav.as_ref().clone()).into_response())
}

#[derive(Serialize)]
struct CourseInfo<'a> {
    course_id: &'a str,
    title: &'a str,
}

async fn courses(State(state): State<AppState>, _auth: AuthUser) -> Result<Response, ApiError> {
    let corpus = state.require_corpus()?;
    Ok(Json(vec![CourseInfo {
        course_id: &corpus.course_id,
        title: &corpus.title,
    }])
    .into_response())
}

async fn weeks(
    State(state): State<AppState>,
    _auth: AuthUser,
    Path(id): Path<String>,
) -> Result<Json<Vec<u32>>, ApiError> {
    let corpus = state.require_corpus()?;
    if corpus.course_id != id {
        return Err(ApiError::not_found(format!("unknown course {id:?}")));
    }
    Ok(Json(corpus.weeks()))
}

#[derive(Serialize)]
struct SlideListing {
    week: u32,
    slide: u32,
    image_url: Option<String>,
    transcript_available: bool,
}

async fn slides(
    State(state): State<AppState>,
    _auth: AuthUser,
    Path(week): Path<String>,
) -> Result<Json<Vec<SlideListing>>, ApiError> {
    let corpus = state.require_corpus()?;
    let week: u32 = parse_id(&week, "week")?;
    let slides = corpus.slides(week);
    if slides.is_empty() {
        return Err(ApiError::not_found(format!("unknown week {week}")));
    }
    Ok(Json(
        slides
            .into_iter()
            .map(|s| SlideListing {
                week: s.week,
                slide: s.slide,
                image_url: s.image_ref.map(|_| image_url(s.week, s.slide)),
                transcript_available: s.transcript_available,
            })
            .collect(),
    ))
}

fn slide_position(corpus: &Corpus, week: &str, slide: &str) -> Result<(u32, u32), ApiError> {
    let week: u32 = parse_id(week, "week")?;
    let slide: u32 = parse_id(slide, "slide")?;
    if !corpus.has_slide(week, slide) {
        return Err(ApiError::not_found(format!("unknown slide {week}/{slide}")));
    }
    Ok((week, slide))
}

async fn slide_image(
    State(state): State<AppState>,
    _auth: AuthUser,
    Path((week, slide)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let corpus = state.require_corpus()?;
    let (week, slide) = slide_position(corpus, &week, &slide)?;
    let path = corpus
        .image_path(week, slide)
        .ok_or_else(|| ApiError::not_found(format!("slide {week}/{slide} has no image")))?;
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::not_found(format!("slide {week}/{slide} image unreadable: {e}")))?;
    Ok(([(CONTENT_TYPE, "image/png")], bytes).into_response())
}

#[derive(Deserialize)]
struct TranscriptQuery {
    #[serde(default)]
    audio: bool,
}

#[derive(Serialize)]
struct TranscriptResponse {
    week: u32,
    slide: u32,
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    audio_url: Option<String>,
}

async fn transcript(
    State(state): State<AppState>,
    _auth: AuthUser,
    Path((week, slide)): Path<(String, String)>,
    Query(q): Query<TranscriptQuery>,
) -> Result<Json<TranscriptResponse>, ApiError> {
    let corpus = state.require_corpus()?;
    let (week, slide) = slide_position(corpus, &week, &slide)?;
    let text = corpus
        .transcript(week, slide)
        .ok_or_else(|| ApiError::not_found(format!("slide {week}/{slide} has no transcript")))?
        .to_owned();
    // Synthesis is deferred to the first GET /audio/{id}.
    let audio_url =
        (q.audio && state.0.tts.is_some()).then(|| format!("/audio/{}", state.issue_audio(text.clone(), None)));
    Ok(Json(TranscriptResponse {
        week,
        slide,
        text,
        audio_url,
    }))
}
