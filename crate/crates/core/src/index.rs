//! Exact inner-product flat index: the stage-I retrieval engine.
//!
//! Every stored vector is unit-normalized on insertion, so inner product
//! equals cosine similarity. Search is exhaustive; nothing is approximated.
//!
//! On disk an index is a directory holding
//!
//! * `manifest.json`: `{"version":1,"dimension":D,"count":N,"ids":[...]}`
//!   with ids in insertion order;
//! * `vectors.bin`: `N × D` little-endian `f32`, row-major, row `i` belongs
//!   to `ids[i]`. No header, no padding.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{dot, EmbedError, EmbeddingVector};

pub const DEFAULT_K: usize = 10;
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VECTORS_FILE: &str = "vectors.bin";

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("dimension mismatch: index has {expected}, vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot index a zero vector")]
    ZeroVector,
    #[error("index is finalized; no more additions")]
    IndexFinalized,
    #[error("index must be finalized before it is searched or saved")]
    NotFinalized,
    #[error("index is empty")]
    EmptyIndex,
    #[error("k must be positive")]
    ZeroK,
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt index: {0}")]
    CorruptManifest(String),
}

/// One search hit. `stage1_score` is the inner product against the query;
/// `stage2_score` is filled in by the reranker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub stage1_score: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stage2_score: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    dimension: usize,
    count: usize,
    ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FlatIndex {
    dimension: usize,
    ids: Vec<String>,
    id_set: HashSet<String>,
    // row-major, ids.len() × dimension
    data: Vec<f32>,
    finalized: bool,
}

impl FlatIndex {
    /// # Panics
    /// When `dimension` is zero.
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "index dimension must be positive");
        Self {
            dimension,
            ids: Vec::new(),
            id_set: HashSet::new(),
            data: Vec::new(),
            finalized: false,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Document ids in insertion order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// The stored (normalized) vector of row `row`.
    pub fn vector(&self, row: usize) -> &[f32] {
        &self.data[row * self.dimension..(row + 1) * self.dimension]
    }

    /// Normalizes `vector` and appends it under `doc_id`.
    pub fn add(&mut self, doc_id: impl Into<String>, vector: &EmbeddingVector) -> Result<(), IndexError> {
        let doc_id = doc_id.into();
        if self.finalized {
            return Err(IndexError::IndexFinalized);
        }
        if vector.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got: vector.dimension(),
            });
        }
        if self.id_set.contains(&doc_id) {
            return Err(IndexError::DuplicateId(doc_id));
        }
        let unit = vector.normalize().map_err(|e| match e {
            EmbedError::ZeroVector => IndexError::ZeroVector,
            other => unreachable!("normalize only fails on zero vectors: {other}"),
        })?;
        self.data.extend_from_slice(unit.as_slice());
        self.id_set.insert(doc_id.clone());
        self.ids.push(doc_id);
        Ok(())
    }

    /// Freezes the index. Idempotent.
    pub fn finalize(&mut self) {
        self.finalized = true;
    }

    /// Top-`k` rows by inner product with `query`, best first.
    ///
    /// Ties go to the earlier-inserted row. The query is used as given;
    /// callers are expected to normalize it.
    pub fn search(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Candidate>, IndexError> {
        if !self.finalized {
            return Err(IndexError::NotFinalized);
        }
        if self.is_empty() {
            return Err(IndexError::EmptyIndex);
        }
        if query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        if k == 0 {
            return Err(IndexError::ZeroK);
        }

        let q = query.as_slice();
        let mut scored: Vec<(f64, usize)> = self
            .data
            .chunks_exact(self.dimension)
            .map(|row| dot(row, q))
            .zip(0..)
            .collect();

        let by_rank = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)) };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_rank);

        Ok(scored
            .into_iter()
            .map(|(score, row)| Candidate {
                doc_id: self.ids[row].clone(),
                stage1_score: score,
                stage2_score: None,
            })
            .collect())
    }

    /// Writes `manifest.json` and `vectors.bin` into directory `dir`,
    /// creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), IndexError> {
        if !self.finalized {
            return Err(IndexError::NotFinalized);
        }
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(io_err(dir))?;

        let manifest = Manifest {
            version: FORMAT_VERSION,
            dimension: self.dimension,
            count: self.len(),
            ids: self.ids.clone(),
        };
        let manifest_path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, json).map_err(io_err(&manifest_path))?;

        let vectors_path = dir.join(VECTORS_FILE);
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&vectors_path, bytes).map_err(io_err(&vectors_path))?;
        Ok(())
    }

    /// Reads an index written by [`FlatIndex::save`]. The result is finalized.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, IndexError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join(MANIFEST_FILE);
        let raw = fs::read(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: Manifest = serde_json::from_slice(&raw)
            .map_err(|e| IndexError::CorruptManifest(format!("unreadable manifest: {e}")))?;

        if manifest.version != FORMAT_VERSION {
            return Err(IndexError::CorruptManifest(format!(
                "unsupported version {}",
                manifest.version
            )));
        }
        if manifest.dimension == 0 {
            return Err(IndexError::CorruptManifest("dimension is zero".into()));
        }
        if manifest.ids.len() != manifest.count {
            return Err(IndexError::CorruptManifest(format!(
                "count is {} but {} ids listed",
                manifest.count,
                manifest.ids.len()
            )));
        }
        let mut id_set = HashSet::with_capacity(manifest.count);
        for id in &manifest.ids {
            if !id_set.insert(id.clone()) {
                return Err(IndexError::CorruptManifest(format!("duplicate id {id:?}")));
            }
        }

        let vectors_path = dir.join(VECTORS_FILE);
        let bytes = fs::read(&vectors_path).map_err(io_err(&vectors_path))?;
        let expected = manifest
            .count
            .checked_mul(manifest.dimension)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| IndexError::CorruptManifest("count × dimension overflows".into()))?;
        if bytes.len() != expected {
            return Err(IndexError::CorruptManifest(format!(
                "{VECTORS_FILE} holds {} bytes, manifest implies {expected}",
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        for (row, chunk) in data.chunks_exact(manifest.dimension).enumerate() {
            let norm = dot(chunk, chunk).sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
                return Err(IndexError::CorruptManifest(format!(
                    "row {row} is not a unit vector (norm {norm})"
                )));
            }
        }

        Ok(Self {
            dimension: manifest.dimension,
            ids: manifest.ids,
            id_set,
            data,
            finalized: true,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IndexError + '_ {
    move |source| IndexError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}
