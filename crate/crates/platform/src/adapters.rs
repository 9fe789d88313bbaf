//! HTTP clients for the external embedder, scorer, generator and TTS
//! services.
//!
//! | adapter   | request                         | response            |
//! |-----------|---------------------------------|---------------------|
//! | embedder  | `{"text"}`                      | `{"vector": [...]}` |
//! | scorer    | `{"input": "<q> [SEP] <c>"}`    | `{"score": x}`      |
//! | generator | `{"query", "context"}`          | `{"text"}`          |
//! | tts       | `{"text"}`                      | WAV bytes           |

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use ureq::Agent;

use lectern_core::embedding::{EmbedError, EmbeddingProvider, EmbeddingVector};
use lectern_core::pipeline::{GenerateError, GeneratorAdapter};
use lectern_core::rerank::{format_pair, PairScorer, ScoreError};

const MAX_AUDIO_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Error)]
#[error("{url}: {message}")]
pub struct AdapterError {
    pub url: String,
    pub message: String,
}

/// Blocking JSON client shared by the adapters.
#[derive(Clone)]
pub struct HttpClient {
    agent: Agent,
    url: String,
}

impl HttpClient {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent: Agent = Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { agent, url: url.into() }
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn fail(&self, message: impl ToString) -> AdapterError {
        AdapterError {
            url: self.url.clone(),
            message: message.to_string(),
        }
    }

    fn post_json<B: Serialize, T: DeserializeOwned>(&self, body: &B) -> Result<T, AdapterError> {
        let resp = self.agent.post(&self.url).send_json(body).map_err(|e| self.fail(e))?;
        resp.into_body().read_json().map_err(|e| self.fail(e))
    }

    fn post_bytes<B: Serialize>(&self, body: &B) -> Result<Vec<u8>, AdapterError> {
        let resp = self.agent.post(&self.url).send_json(body).map_err(|e| self.fail(e))?;
        resp.into_body()
            .with_config()
            .limit(MAX_AUDIO_BYTES)
            .read_to_vec()
            .map_err(|e| self.fail(e))
    }
}

#[derive(Serialize)]
struct TextBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct VectorReply {
    vector: Vec<f32>,
}

#[derive(Serialize)]
struct ScoreBody<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct ScoreReply {
    score: f64,
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    query: &'a str,
    context: &'a str,
}

#[derive(Deserialize)]
struct GenerateReply {
    text: String,
}

pub struct ExternalEmbedder {
    client: HttpClient,
    dimension: usize,
}

impl ExternalEmbedder {
    pub fn new(client: HttpClient, dimension: usize) -> Self {
        Self { client, dimension }
    }
}

impl EmbeddingProvider for ExternalEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if lectern_core::tokenize::tokenize(text).is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let reply: VectorReply = self
            .client
            .post_json(&TextBody { text })
            .map_err(|e| EmbedError::Provider(e.to_string()))?;
        if reply.vector.len() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                got: reply.vector.len(),
            });
        }
        EmbeddingVector::new(reply.vector)
    }

    fn name(&self) -> &str {
        "external"
    }
}

pub struct ExternalScorer {
    client: HttpClient,
}

impl ExternalScorer {
    pub fn new(client: HttpClient) -> Self {
        Self { client }
    }
}

impl PairScorer for ExternalScorer {
    fn score(&self, query: &str, candidate: &str) -> Result<f64, ScoreError> {
        let input = format_pair(query, candidate).map_err(|e| ScoreError(e.to_string()))?;
        let reply: ScoreReply = self
            .client
            .post_json(&ScoreBody { input: &input })
            .map_err(|e| ScoreError(e.to_string()))?;
        Ok(reply.score)
    }

    fn name(&self) -> &str {
        "external"
    }
}

pub struct ExternalGenerator {
    client: HttpClient,
}

impl ExternalGenerator {
    pub fn new(client: HttpClient) -> Self {
        Self { client }
    }
}

impl GeneratorAdapter for ExternalGenerator {
    fn generate(&self, query: &str, context: &str) -> Result<String, GenerateError> {
        let reply: GenerateReply = self
            .client
            .post_json(&GenerateBody { query, context })
            .map_err(|e| GenerateError(e.to_string()))?;
        Ok(reply.text)
    }

    fn name(&self) -> &str {
        "external"
    }
}

/// Text-to-speech backend.
pub trait TtsAdapter: Send + Sync {
    fn synthesize(&self, text: &str) -> Result<Vec<u8>, AdapterError>;
}

pub struct ExternalTts {
    client: HttpClient,
}

impl ExternalTts {
    pub fn new(client: HttpClient) -> Self {
        Self { client }
    }
}

impl TtsAdapter for ExternalTts {
    fn synthesize(&self, text: &str) -> Result<Vec<u8>, AdapterError> {
        self.client.post_bytes(&TextBody { text })
    }
}
