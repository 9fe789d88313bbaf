//! Service configuration: one JSON file plus `LECTERN_*` environment
//! overrides. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use lectern_core::embedding::DEFAULT_DIMENSION;
use lectern_core::index::DEFAULT_K;
use lectern_core::pipeline::{PipelineConfig, DEFAULT_MAX_INPUT_CHARS};

pub const DEFAULT_SESSION_TTL_SECS: u64 = 24 * 60 * 60;
pub const DEFAULT_ADAPTER_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RerankMode {
    #[default]
    Lexical,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderMode {
    #[default]
    Hash,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorMode {
    #[default]
    Passthrough,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TtsMode {
    #[default]
    Null,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Default)]
pub struct RerankConfig {
    #[serde(default)]
    pub mode: RerankMode,
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct EmbedderConfig {
    #[serde(default)]
    pub mode: EmbedderMode,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub url: Option<String>,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            mode: EmbedderMode::Hash,
            dim: DEFAULT_DIMENSION,
            url: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Default)]
pub struct GeneratorConfig {
    #[serde(default)]
    pub mode: GeneratorMode,
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Default)]
pub struct TtsConfig {
    #[serde(default)]
    pub mode: TtsMode,
    pub url: Option<String>,
}

fn default_dim() -> usize {
    DEFAULT_DIMENSION
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default)]
pub struct Config {
    pub listen_addr: String,
    pub corpus_dir: PathBuf,
    pub index_path: PathBuf,
    pub max_input_chars: usize,
    pub k: usize,
    pub rerank: RerankConfig,
    pub embedder: EmbedderConfig,
    pub generator: GeneratorConfig,
    pub tts: TtsConfig,
    pub db_path: PathBuf,
    /// Session lifetime; 24 h unless set.
    pub session_ttl_secs: u64,
    /// Timeout for every call to an external adapter.
    pub adapter_timeout_ms: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen_addr: "127.0.0.1:8080".into(),
            corpus_dir: "corpus".into(),
            index_path: "index".into(),
            max_input_chars: DEFAULT_MAX_INPUT_CHARS,
            k: DEFAULT_K,
            rerank: RerankConfig::default(),
            embedder: EmbedderConfig::default(),
            generator: GeneratorConfig::default(),
            tts: TtsConfig::default(),
            db_path: "lectern.db".into(),
            session_ttl_secs: DEFAULT_SESSION_TTL_SECS,
            adapter_timeout_ms: DEFAULT_ADAPTER_TIMEOUT_MS,
        }
    }
}

impl Config {
    /// Reads `path`, applies environment overrides and checks the result.
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config =
            serde_json::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.apply_overrides(|key| std::env::var(key).ok());
        if let Some(base) = path.parent() {
            cfg.resolve_relative_to(base);
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Applies `LECTERN_*` overrides looked up through `lookup`.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(v) = lookup("LECTERN_LISTEN_ADDR") {
            self.listen_addr = v;
        }
        if let Some(v) = lookup("LECTERN_CORPUS_DIR") {
            self.corpus_dir = v.into();
        }
        if let Some(v) = lookup("LECTERN_INDEX_PATH") {
            self.index_path = v.into();
        }
        if let Some(v) = lookup("LECTERN_DB_PATH") {
            self.db_path = v.into();
        }
        if let Some(v) = lookup("LECTERN_RERANK_URL") {
            self.rerank.url = Some(v);
        }
        if let Some(v) = lookup("LECTERN_EMBEDDER_URL") {
            self.embedder.url = Some(v);
        }
        if let Some(v) = lookup("LECTERN_GENERATOR_URL") {
            self.generator.url = Some(v);
        }
        if let Some(v) = lookup("LECTERN_TTS_URL") {
            self.tts.url = Some(v);
        }
    }

    fn resolve_relative_to(&mut self, base: &Path) {
        for p in [&mut self.corpus_dir, &mut self.index_path, &mut self.db_path] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn check(&self) -> anyhow::Result<()> {
        self.pipeline().validate()?;
        if self.embedder.dim == 0 {
            bail!("embedder.dim must be positive");
        }
        let needs_url = [
            ("rerank", self.rerank.mode == RerankMode::External, &self.rerank.url),
            (
                "embedder",
                self.embedder.mode == EmbedderMode::External,
                &self.embedder.url,
            ),
            (
                "generator",
                self.generator.mode == GeneratorMode::External,
                &self.generator.url,
            ),
            ("tts", self.tts.mode == TtsMode::External, &self.tts.url),
        ];
        for (name, external, url) in needs_url {
            if external && url.is_none() {
                bail!("{name}.mode is \"external\" but {name}.url is not set");
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            rerank_enabled: true,
            max_input_chars: self.max_input_chars,
            final_n: 1,
        }
    }
}
