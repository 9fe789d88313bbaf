//! Course corpora: slide images, lecture transcripts and QA pairs.
//!
//! A corpus directory looks like
//!
//! ```text
//! course.json           {"course_id": "...", "title": "..."}
//! qa.jsonl              {"id","week","slide","question","answer","qtype"[,"image"]} per line
//! transcripts.jsonl     {"week","slide","text"} per line (optional file)
//! weeks/week_01/slide_01.png
//! ```
//!
//! Unknown JSON fields are ignored. A record without an explicit `"image"`
//! picks up `weeks/week_{NN}/slide_{MM}.png` when that file exists.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbedError, EmbeddingProvider};
use crate::index::{FlatIndex, IndexError};
use crate::rerank::DocumentTexts;
use crate::tokenize::tokenize;

pub const COURSE_FILE: &str = "course.json";
pub const QA_FILE: &str = "qa.jsonl";
pub const TRANSCRIPTS_FILE: &str = "transcripts.jsonl";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}:{line}: {message}")]
    SchemaViolation { file: String, line: usize, message: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {doc_id:?} references missing image {path}")]
    DanglingImageRef { doc_id: String, path: String },
    #[error("corpus has no records")]
    EmptyCorpus,
    #[error("cannot embed answer of record {doc_id:?}: {source}")]
    EmbedFailure {
        doc_id: String,
        #[source]
        source: EmbedError,
    },
    #[error("embedding of record {doc_id:?} rejected by index: {source}")]
    Index {
        doc_id: String,
        #[source]
        source: IndexError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Closed,
    Open,
    Summarization,
    Classification,
}

/// One answer unit: the text that gets indexed plus where it lives in the
/// course.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentRecord {
    pub doc_id: String,
    pub week: u32,
    pub slide: u32,
    pub answer_text: String,
    pub question_text: Option<String>,
    pub qtype: QuestionType,
    pub transcript_text: Option<String>,
    /// Path relative to the corpus root.
    pub image_ref: Option<String>,
}

/// A slide as the content listing presents it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlideInfo {
    pub week: u32,
    pub slide: u32,
    pub image_ref: Option<String>,
    pub transcript_available: bool,
}

/// A consistency problem found by [`Corpus::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Issue {
    DanglingImageRef { doc_id: String, path: String },
    MissingTranscript { week: u32, slide: u32 },
    EmptyAnswer { doc_id: String },
}

impl std::fmt::Display for Issue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Issue::DanglingImageRef { doc_id, path } => {
                write!(f, "record {doc_id}: image {path} does not exist")
            }
            Issue::MissingTranscript { week, slide } => {
                write!(f, "week {week} slide {slide}: no transcript")
            }
            Issue::EmptyAnswer { doc_id } => write!(f, "record {doc_id}: empty answer"),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CourseFile {
    course_id: String,
    title: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct QaLine {
    id: String,
    week: u32,
    slide: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    question: Option<String>,
    answer: String,
    qtype: QuestionType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranscriptLine {
    week: u32,
    slide: u32,
    text: String,
}

/// Conventional image location of a slide, relative to the corpus root.
pub fn slide_image_path(week: u32, slide: u32) -> String {
    format!("weeks/week_{week:02}/slide_{slide:02}.png")
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
    pub course_id: String,
    pub title: String,
    records: Vec<DocumentRecord>,
    by_id: HashMap<String, usize>,
    transcripts: BTreeMap<(u32, u32), String>,
    images: BTreeMap<(u32, u32), String>,
}

impl Corpus {
    /// Assembles a corpus from parts. Transcripts are attached to records by
    /// `(week, slide)`.
    pub fn from_parts(
        root: impl Into<PathBuf>,
        course_id: impl Into<String>,
        title: impl Into<String>,
        records: Vec<DocumentRecord>,
        transcripts: BTreeMap<(u32, u32), String>,
    ) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.doc_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(r.doc_id.clone()));
            }
        }
        let mut corpus = Self {
            root: root.into(),
            course_id: course_id.into(),
            title: title.into(),
            records,
            by_id,
            transcripts,
            images: BTreeMap::new(),
        };
        for r in &mut corpus.records {
            r.transcript_text = corpus.transcripts.get(&(r.week, r.slide)).cloned();
        }
        for r in &corpus.records {
            if let Some(img) = &r.image_ref {
                corpus.images.insert((r.week, r.slide), img.clone());
            }
        }
        Ok(corpus)
    }

    /// Loads and validates the corpus under `root`. Record order follows
    /// `qa.jsonl`.
    pub fn load(root: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let root = root.as_ref();

        let course_path = root.join(COURSE_FILE);
        let course: CourseFile =
            serde_json::from_str(&read_required(&course_path)?).map_err(|e| schema(COURSE_FILE, e.line(), e))?;

        let transcripts_path = root.join(TRANSCRIPTS_FILE);
        let mut transcripts = BTreeMap::new();
        if transcripts_path.exists() {
            for (line_no, line) in jsonl_lines(&read_required(&transcripts_path)?) {
                let t: TranscriptLine = serde_json::from_str(line).map_err(|e| schema(TRANSCRIPTS_FILE, line_no, e))?;
                check_position(TRANSCRIPTS_FILE, line_no, t.week, t.slide)?;
                if transcripts.insert((t.week, t.slide), t.text).is_some() {
                    return Err(schema(
                        TRANSCRIPTS_FILE,
                        line_no,
                        format!("second transcript for week {} slide {}", t.week, t.slide),
                    ));
                }
            }
        }

        let images = scan_images(root)?;

        let qa_path = root.join(QA_FILE);
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (line_no, line) in jsonl_lines(&read_required(&qa_path)?) {
            let qa: QaLine = serde_json::from_str(line).map_err(|e| schema(QA_FILE, line_no, e))?;
            check_position(QA_FILE, line_no, qa.week, qa.slide)?;
            if qa.id.is_empty() {
                return Err(schema(QA_FILE, line_no, "empty id"));
            }
            if !seen.insert(qa.id.clone()) {
                return Err(CorpusError::DuplicateId(qa.id));
            }
            let image_ref = match qa.image {
                Some(path) => {
                    if !root.join(&path).is_file() {
                        return Err(CorpusError::DanglingImageRef { doc_id: qa.id, path });
                    }
                    Some(path)
                }
                None => images.get(&(qa.week, qa.slide)).cloned(),
            };
            records.push(DocumentRecord {
                doc_id: qa.id,
                week: qa.week,
                slide: qa.slide,
                answer_text: qa.answer,
                question_text: qa.question,
                qtype: qa.qtype,
                transcript_text: None,
                image_ref,
            });
        }

        let mut corpus = Self::from_parts(root, course.course_id, course.title, records, transcripts)?;
        for (pos, path) in images {
            corpus.images.entry(pos).or_insert(path);
        }
        Ok(corpus)
    }

    /// Writes the metadata files (`course.json`, `qa.jsonl`,
    /// `transcripts.jsonl`) into `dir`. Images are not copied; only
    /// unconventional image paths are written out explicitly.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
        let dir = dir.as_ref();
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;

        let course = CourseFile {
            course_id: self.course_id.clone(),
            title: self.title.clone(),
        };
        let p = dir.join(COURSE_FILE);
        fs::write(&p, serde_json::to_string(&course).expect("serializes")).map_err(io(&p))?;

        let mut qa = String::new();
        for r in &self.records {
            let line = QaLine {
                id: r.doc_id.clone(),
                week: r.week,
                slide: r.slide,
                question: r.question_text.clone(),
                answer: r.answer_text.clone(),
                qtype: r.qtype,
                image: r.image_ref.clone().filter(|p| *p != slide_image_path(r.week, r.slide)),
            };
            qa.push_str(&serde_json::to_string(&line).expect("serializes"));
            qa.push('\n');
        }
        let p = dir.join(QA_FILE);
        fs::write(&p, qa).map_err(io(&p))?;

        let mut tr = String::new();
        for (&(week, slide), text) in &self.transcripts {
            let line = TranscriptLine {
                week,
                slide,
                text: text.clone(),
            };
            tr.push_str(&serde_json::to_string(&line).expect("serializes"));
            tr.push('\n');
        }
        let p = dir.join(TRANSCRIPTS_FILE);
        fs::write(&p, tr).map_err(io(&p))?;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn records(&self) -> &[DocumentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&DocumentRecord> {
        self.by_id.get(doc_id).map(|&i| &self.records[i])
    }

    pub fn transcript(&self, week: u32, slide: u32) -> Option<&str> {
        self.transcripts.get(&(week, slide)).map(String::as_str)
    }

    /// Absolute path of a slide's image, if the corpus knows one.
    pub fn image_path(&self, week: u32, slide: u32) -> Option<PathBuf> {
        self.images.get(&(week, slide)).map(|rel| self.root.join(rel))
    }

    fn positions(&self) -> BTreeSet<(u32, u32)> {
        self.records
            .iter()
            .map(|r| (r.week, r.slide))
            .chain(self.transcripts.keys().copied())
            .chain(self.images.keys().copied())
            .collect()
    }

    /// Weeks that have at least one slide, ascending.
    pub fn weeks(&self) -> Vec<u32> {
        let weeks: BTreeSet<u32> = self.positions().into_iter().map(|(w, _)| w).collect();
        weeks.into_iter().collect()
    }

    /// Slides of `week`, ascending. Empty when the week is unknown.
    pub fn slides(&self, week: u32) -> Vec<SlideInfo> {
        self.positions()
            .into_iter()
            .filter(|&(w, _)| w == week)
            .map(|(week, slide)| SlideInfo {
                week,
                slide,
                image_ref: self.images.get(&(week, slide)).cloned(),
                transcript_available: self.transcripts.contains_key(&(week, slide)),
            })
            .collect()
    }

    pub fn has_slide(&self, week: u32, slide: u32) -> bool {
        self.positions().contains(&(week, slide))
    }

    /// Lists consistency problems without changing anything: dangling image
    /// references, record slides without a transcript, and answers with no
    /// tokens.
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let mut slides_checked = HashSet::new();
        for r in &self.records {
            if let Some(path) = &r.image_ref {
                if !self.root.join(path).is_file() {
                    issues.push(Issue::DanglingImageRef {
                        doc_id: r.doc_id.clone(),
                        path: path.clone(),
                    });
                }
            }
            if slides_checked.insert((r.week, r.slide)) && !self.transcripts.contains_key(&(r.week, r.slide)) {
                issues.push(Issue::MissingTranscript {
                    week: r.week,
                    slide: r.slide,
                });
            }
            if tokenize(&r.answer_text).is_empty() {
                issues.push(Issue::EmptyAnswer {
                    doc_id: r.doc_id.clone(),
                });
            }
        }
        issues
    }

    /// Embeds every answer and returns the finalized stage-I index, rows in
    /// corpus order.
    pub fn build_index(&self, embedder: &dyn EmbeddingProvider) -> Result<FlatIndex, CorpusError> {
        if self.records.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut index = FlatIndex::new(embedder.dimension());
        for r in &self.records {
            let embedding = embedder
                .embed(&r.answer_text)
                .map_err(|source| CorpusError::EmbedFailure {
                    doc_id: r.doc_id.clone(),
                    source,
                })?;
            index.add(r.doc_id.clone(), &embedding).map_err(|source| match source {
                IndexError::ZeroVector => CorpusError::EmbedFailure {
                    doc_id: r.doc_id.clone(),
                    source: EmbedError::ZeroVector,
                },
                source => CorpusError::Index {
                    doc_id: r.doc_id.clone(),
                    source,
                },
            })?;
        }
        index.finalize();
        Ok(index)
    }
}

impl DocumentTexts for Corpus {
    fn text(&self, doc_id: &str) -> Option<&str> {
        self.get(doc_id).map(|r| r.answer_text.as_str())
    }
}

fn read_required(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            CorpusError::MissingFile(path.to_path_buf())
        } else {
            CorpusError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })
}

/// Non-blank lines with 1-based line numbers.
fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn schema(file: &str, line: usize, message: impl ToString) -> CorpusError {
    CorpusError::SchemaViolation {
        file: file.to_owned(),
        line,
        message: message.to_string(),
    }
}

fn check_position(file: &str, line: usize, week: u32, slide: u32) -> Result<(), CorpusError> {
    if week == 0 || slide == 0 {
        return Err(schema(file, line, "week and slide must be positive"));
    }
    Ok(())
}

/// Finds `weeks/week_NN/slide_MM.png` files.
fn scan_images(root: &Path) -> Result<BTreeMap<(u32, u32), String>, CorpusError> {
    let mut found = BTreeMap::new();
    let weeks_dir = root.join("weeks");
    let Ok(week_entries) = fs::read_dir(&weeks_dir) else {
        return Ok(found);
    };
    for week_entry in week_entries.flatten() {
        let week_name = week_entry.file_name().to_string_lossy().into_owned();
        let Some(week) = week_name.strip_prefix("week_").and_then(|n| n.parse::<u32>().ok()) else {
            continue;
        };
        let Ok(slide_entries) = fs::read_dir(week_entry.path()) else {
            continue;
        };
        for slide_entry in slide_entries.flatten() {
            let name = slide_entry.file_name().to_string_lossy().into_owned();
            let slide = name
                .strip_prefix("slide_")
                .and_then(|n| n.strip_suffix(".png"))
                .and_then(|n| n.parse::<u32>().ok());
            if let Some(slide) = slide.filter(|&s| s > 0 && week > 0) {
                found.insert((week, slide), format!("weeks/{week_name}/{name}"));
            }
        }
    }
    Ok(found)
}
