//! The `lectern` operator command line.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use tracing::info;

use lectern_core::corpus::Corpus;
use lectern_core::embedding::{HashEmbedder, DEFAULT_DIMENSION};
use lectern_core::eval::{format_ablation, format_report, run_ablation, run_eval, Scale};
use lectern_core::index::{FlatIndex, DEFAULT_K};
use lectern_core::pipeline::{Pipeline, PipelineConfig};
use lectern_core::rerank::LexicalScorer;

use crate::config::Config;
use crate::server::{serve, AppState};
use crate::store::{UserStore, UserType};

/// Written next to an index so `query` can find the corpus it came from.
pub const SOURCE_FILE: &str = "source.json";
pub const PASSWORD_ENV: &str = "LECTERN_PASSWORD";

#[derive(Debug, Parser)]
#[command(name = "lectern", version, about = "Slide-grounded course question answering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a corpus directory and report consistency problems.
    Ingest {
        dir: PathBuf,
        /// Exit with status 2 when any problem is found.
        #[arg(long)]
        strict: bool,
    },
    /// Embed every answer of a corpus and write the index.
    BuildIndex {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIMENSION)]
        dim: usize,
    },
    /// Answer one question from the command line.
    Query {
        idx: PathBuf,
        text: String,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        no_rerank: bool,
        /// Corpus directory; defaults to the one recorded at build time.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// How many ranked candidates to print.
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
    /// Score the pipeline on the corpus's own questions.
    Eval {
        dir: PathBuf,
        #[arg(long)]
        idx: PathBuf,
        /// Run with and without the reranker.
        #[arg(long)]
        ablation: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Print scores as percentages.
        #[arg(long)]
        percent: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "LECTERN_CONFIG")]
        config: PathBuf,
    },
    /// Manage accounts in the user store.
    User {
        #[command(flatten)]
        db: DbArgs,
        #[command(subcommand)]
        action: UserAction,
    },
}

#[derive(Debug, Args)]
pub struct DbArgs {
    /// User store file.
    #[arg(long, global = true, conflicts_with = "config")]
    db: Option<PathBuf>,
    /// Service config whose db_path to use.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum UserAction {
    /// Create an account. The password is read from LECTERN_PASSWORD or the
    /// first line of stdin.
    Add {
        username: String,
        #[arg(long = "type", default_value = "regular")]
        user_type: UserType,
    },
    /// Delete an account by username or numeric id.
    Del { user: String },
    List {
        #[arg(long = "type")]
        user_type: Option<UserType>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexSource {
    corpus_dir: PathBuf,
    embedder: String,
    dim: usize,
}

pub fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Ingest { dir, strict } => ingest(&mut out, &dir, strict),
        Command::BuildIndex { dir, out: idx, dim } => {
            build_index(&mut out, &dir, &idx, dim).map(|()| ExitCode::SUCCESS)
        }
        Command::Query {
            idx,
            text,
            k,
            no_rerank,
            corpus,
            top,
        } => query(&mut out, &idx, &text, k, !no_rerank, corpus, top).map(|()| ExitCode::SUCCESS),
        Command::Eval {
            dir,
            idx,
            ablation,
            json,
            k,
            percent,
        } => eval(&mut out, &dir, &idx, ablation, json.as_deref(), k, percent).map(|()| ExitCode::SUCCESS),
        Command::Serve { config } => serve_blocking(&config).map(|()| ExitCode::SUCCESS),
        Command::User { db, action } => user(&mut out, &db, action).map(|()| ExitCode::SUCCESS),
    }
}

fn ingest(out: &mut impl Write, dir: &Path, strict: bool) -> anyhow::Result<ExitCode> {
    let corpus = Corpus::load(dir)?;
    let issues = corpus.validate();
    writeln!(
        out,
        "{} \"{}\": {} records, weeks {:?}",
        corpus.course_id,
        corpus.title,
        corpus.len(),
        corpus.weeks()
    )?;
    for issue in &issues {
        writeln!(out, "  issue: {issue}")?;
    }
    writeln!(out, "{} issue(s)", issues.len())?;
    Ok(if strict && !issues.is_empty() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn build_index(out: &mut impl Write, dir: &Path, idx: &Path, dim: usize) -> anyhow::Result<()> {
    if dim == 0 {
        bail!("--dim must be positive");
    }
    let corpus = Corpus::load(dir)?;
    let index = corpus.build_index(&HashEmbedder::new(dim))?;
    index.save(idx)?;
    let source = IndexSource {
        corpus_dir: fs::canonicalize(dir).unwrap_or_else(|_| dir.to_path_buf()),
        embedder: "hash".into(),
        dim,
    };
    fs::write(idx.join(SOURCE_FILE), serde_json::to_string_pretty(&source)?)?;
    info!(records = index.len(), dim, out = %idx.display(), "index written");
    writeln!(
        out,
        "indexed {} records (dim {dim}) into {}",
        index.len(),
        idx.display()
    )?;
    Ok(())
}

fn corpus_for_index(idx: &Path, explicit: Option<PathBuf>) -> anyhow::Result<PathBuf> {
    if let Some(dir) = explicit {
        return Ok(dir);
    }
    let raw = fs::read_to_string(idx.join(SOURCE_FILE))
        .with_context(|| format!("{} has no {SOURCE_FILE}; pass --corpus", idx.display()))?;
    let source: IndexSource = serde_json::from_str(&raw)?;
    Ok(source.corpus_dir)
}

fn query(
    out: &mut impl Write,
    idx: &Path,
    text: &str,
    k: usize,
    rerank: bool,
    corpus_dir: Option<PathBuf>,
    top: usize,
) -> anyhow::Result<()> {
    let index = FlatIndex::load(idx)?;
    let corpus = Corpus::load(corpus_for_index(idx, corpus_dir)?)?;
    let embedder = HashEmbedder::new(index.dimension());
    let cfg = PipelineConfig {
        k,
        rerank_enabled: rerank,
        ..Default::default()
    };
    let pipeline = Pipeline::new(&index, &corpus, &embedder, &LexicalScorer);
    let (query_used, ranked) = pipeline.rank(text, &cfg)?;
    if query_used.len() < text.len() {
        writeln!(out, "query truncated to {} chars", query_used.chars().count())?;
    }
    writeln!(
        out,
        "{:>4}  {:<16} {:>9} {:>9}  {:>5}  answer",
        "rank", "doc_id", "stage1", "stage2", "slide"
    )?;
    for (rank, c) in ranked.iter().take(top).enumerate() {
        let record = corpus
            .get(&c.doc_id)
            .ok_or_else(|| anyhow!("index document {:?} is not in the corpus", c.doc_id))?;
        let stage2 = c.stage2_score.map_or_else(|| "-".to_owned(), |s| format!("{s:.4}"));
        writeln!(
            out,
            "{:>4}  {:<16} {:>9.4} {:>9}  {:>2}/{:<2}  {}",
            rank + 1,
            c.doc_id,
            c.stage1_score,
            stage2,
            record.week,
            record.slide,
            record.answer_text
        )?;
    }
    Ok(())
}

fn eval(
    out: &mut impl Write,
    dir: &Path,
    idx: &Path,
    ablation: bool,
    json: Option<&Path>,
    k: usize,
    percent: bool,
) -> anyhow::Result<()> {
    let corpus = Corpus::load(dir)?;
    let index = FlatIndex::load(idx)?;
    let embedder = HashEmbedder::new(index.dimension());
    let metric_embedder = HashEmbedder::default();
    let pipeline = Pipeline::new(&index, &corpus, &embedder, &LexicalScorer);
    let cfg = PipelineConfig {
        k,
        ..Default::default()
    };
    let scale = if percent { Scale::Percent } else { Scale::Unit };
    let report = if ablation {
        let report = run_ablation(&corpus, &cfg, &pipeline, &metric_embedder)?;
        write!(out, "{}", format_ablation(&report, scale))?;
        serde_json::to_string_pretty(&report)?
    } else {
        let report = run_eval(&corpus, &cfg, &pipeline, &metric_embedder)?;
        write!(out, "{}", format_report(&report, scale))?;
        serde_json::to_string_pretty(&report)?
    };
    if let Some(path) = json {
        fs::write(path, report + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn serve_blocking(config_path: &Path) -> anyhow::Result<()> {
    let config = Config::load(config_path)?;
    let addr = config.listen_addr.clone();
    let state = AppState::from_config(config)?;
    if state.users().list(None)?.is_empty() {
        tracing::warn!("user store is empty; create an admin with `lectern user add <name> --type admin`");
    }
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        info!(addr = %listener.local_addr()?, "listening");
        serve(state, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn open_store(db: &DbArgs) -> anyhow::Result<UserStore> {
    let path = match (&db.db, &db.config) {
        (Some(path), _) => path.clone(),
        (None, Some(config)) => Config::load(config)?.db_path,
        (None, None) => bail!("pass --db <file> or --config <file>"),
    };
    UserStore::open(&path).with_context(|| format!("opening {}", path.display()))
}

fn read_password() -> anyhow::Result<String> {
    if let Ok(pw) = std::env::var(PASSWORD_ENV) {
        return Ok(pw);
    }
    let mut line = String::new();
    io::stdin().lock().read_line(&mut line)?;
    let pw = line.trim_end_matches(['\r', '\n']).to_owned();
    if pw.is_empty() {
        bail!("no password given; set {PASSWORD_ENV} or pipe it on stdin");
    }
    Ok(pw)
}

fn user(out: &mut impl Write, db: &DbArgs, action: UserAction) -> anyhow::Result<()> {
    let store = open_store(db)?;
    match action {
        UserAction::Add { username, user_type } => {
            let password = read_password()?;
            let user = store.create(&username, &password, user_type)?;
            writeln!(
                out,
                "created {} ({}) id {}",
                user.username,
                user.user_type.as_str(),
                user.user_id
            )?;
        }
        UserAction::Del { user } => {
            let id = match user.parse::<i64>() {
                Ok(id) => id,
                Err(_) => {
                    store
                        .find_by_name(&user)?
                        .ok_or_else(|| anyhow!("no user named {user:?}"))?
                        .user_id
                }
            };
            store.delete(id)?;
            writeln!(out, "deleted user {id}")?;
        }
        UserAction::List { user_type } => {
            for u in store.list(user_type)? {
                writeln!(out, "{:>5}  {:<24} {}", u.user_id, u.username, u.user_type.as_str())?;
            }
        }
    }
    Ok(())
}
