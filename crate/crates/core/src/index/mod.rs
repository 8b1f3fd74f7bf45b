//! The tool storage system: exact cosine kNN and Okapi BM25 over the same
//! set of entries, score fusion, reranking and on-disk snapshots.

mod bm25;
mod rerank;
mod snapshot;

pub use bm25::{idf, term_score, Bm25Params, CorpusStats};
pub use rerank::{rerank, rerank_or_fallback, IdentityReranker, RemoteReranker, RerankDocument, RerankError, Reranker};
pub use snapshot::{SnapshotManifest, SNAPSHOT_FORMAT_VERSION};

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use bm25::LexicalIndex;
use crate::embedding::{EmbeddedDocument, EmbeddingVector};
use crate::tool_model::{ParameterSpec, ToolDocument, ToolHash};

/// Candidates fetched per side for fusion and reranking, as a multiple of k.
pub const CANDIDATE_POOL_FACTOR: usize = 4;
pub const DEFAULT_ALPHA: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("digest {0} is already indexed")]
    DuplicateDigest(ToolHash),
    #[error("tool_id `{0}` is already indexed under another digest")]
    DuplicateToolId(String),
    #[error("digest {0} is not indexed")]
    NotFound(ToolHash),
    #[error("vector dimension {actual} does not match index dimension {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("invalid BM25 parameters: {0}")]
    InvalidParams(String),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("snapshot i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub tool_id: String,
    pub digest: ToolHash,
    pub origin_server: String,
    pub vector: EmbeddingVector,
    pub lexical_text: String,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub parameters: Vec<ParameterSpec>,
}

impl IndexEntry {
    pub fn new(doc: &ToolDocument, digest: ToolHash, embedded: EmbeddedDocument) -> Self {
        Self {
            tool_id: doc.tool_id.clone(),
            digest,
            origin_server: doc.origin_server.clone(),
            vector: embedded.vector,
            lexical_text: embedded.lexical_text,
            name: doc.name.clone(),
            description: doc.description.clone(),
            parameters: doc.parameters.clone(),
        }
    }

    /// The tool as advertised, without synthetic questions.
    pub fn to_document(&self) -> ToolDocument {
        ToolDocument {
            tool_id: self.tool_id.clone(),
            name: self.name.clone(),
            description: self.description.clone(),
            parameters: self.parameters.clone(),
            synthetic_questions: Vec::new(),
            origin_server: self.origin_server.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverTag {
    Vector,
    Bm25,
    Hybrid,
    Reranked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub tool_id: String,
    pub score: f64,
}

/// Scores non-increasing, ties in ascending `tool_id`, ids distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub items: Vec<RankedItem>,
    pub retriever: RetrieverTag,
}

impl RankedResult {
    pub fn empty(retriever: RetrieverTag) -> Self {
        Self { items: Vec::new(), retriever }
    }

    pub fn tool_ids(&self) -> Vec<&str> {
        self.items.iter().map(|i| i.tool_id.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn from_scores(mut scored: Vec<(String, f64)>, k: usize, retriever: RetrieverTag) -> Self {
        scored.sort_by(|a, b| rank_order(a.1, &a.0, b.1, &b.0));
        scored.truncate(k);
        Self {
            items: scored.into_iter().map(|(tool_id, score)| RankedItem { tool_id, score }).collect(),
            retriever,
        }
    }
}

/// Descending score, then ascending tool id.
pub fn rank_order(score_a: f64, id_a: &str, score_b: f64, id_b: &str) -> Ordering {
    score_b.total_cmp(&score_a).then_with(|| id_a.cmp(id_b))
}

/// Which retrieval chain answers a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retriever {
    Vector,
    Bm25,
    Hybrid,
    /// Vector candidates reordered by the configured reranker.
    Rerank,
}

impl Retriever {
    pub const ALL: [Retriever; 4] = [Retriever::Vector, Retriever::Bm25, Retriever::Hybrid, Retriever::Rerank];

    pub fn as_str(self) -> &'static str {
        match self {
            Retriever::Vector => "vector",
            Retriever::Bm25 => "bm25",
            Retriever::Hybrid => "hybrid",
            Retriever::Rerank => "rerank",
        }
    }
}

impl fmt::Display for Retriever {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Retriever {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Retriever::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown retriever `{s}` (expected vector, bm25, hybrid or rerank)"))
    }
}

/// In-memory dual index. Entries are keyed by digest; tool ids are unique.
#[derive(Debug, Clone)]
pub struct IndexStore {
    dimension: usize,
    entries: BTreeMap<ToolHash, IndexEntry>,
    by_tool_id: HashMap<String, ToolHash>,
    lexical: LexicalIndex,
}

impl IndexStore {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "index dimension must be positive");
        Self {
            dimension,
            entries: BTreeMap::new(),
            by_tool_id: HashMap::new(),
            lexical: LexicalIndex::default(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, digest: &ToolHash) -> bool {
        self.entries.contains_key(digest)
    }

    pub fn get(&self, digest: &ToolHash) -> Option<&IndexEntry> {
        self.entries.get(digest)
    }

    pub fn get_by_tool_id(&self, tool_id: &str) -> Option<&IndexEntry> {
        self.by_tool_id.get(tool_id).and_then(|d| self.entries.get(d))
    }

    /// Entries in digest order.
    pub fn entries(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.values()
    }

    pub fn digests(&self) -> impl Iterator<Item = &ToolHash> {
        self.entries.keys()
    }

    pub fn stats(&self) -> CorpusStats {
        self.lexical.stats()
    }

    pub fn insert(&mut self, entry: IndexEntry) -> Result<(), IndexError> {
        if entry.vector.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, actual: entry.vector.dimension() });
        }
        if self.entries.contains_key(&entry.digest) {
            return Err(IndexError::DuplicateDigest(entry.digest));
        }
        if self.by_tool_id.contains_key(&entry.tool_id) {
            return Err(IndexError::DuplicateToolId(entry.tool_id));
        }
        self.lexical.insert(entry.digest, &entry.lexical_text);
        self.by_tool_id.insert(entry.tool_id.clone(), entry.digest);
        self.entries.insert(entry.digest, entry);
        Ok(())
    }

    pub fn remove(&mut self, digest: &ToolHash) -> Result<IndexEntry, IndexError> {
        let entry = self.entries.remove(digest).ok_or(IndexError::NotFound(*digest))?;
        self.lexical.remove(digest, &entry.lexical_text);
        self.by_tool_id.remove(&entry.tool_id);
        Ok(entry)
    }

    /// Exact top-k by cosine similarity over every entry.
    pub fn search_vector(&self, query: &EmbeddingVector, k: usize) -> Result<RankedResult, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.dimension() != self.dimension {
            return Err(IndexError::DimensionMismatch { expected: self.dimension, actual: query.dimension() });
        }
        let scored = self
            .entries
            .values()
            .map(|e| (e.tool_id.clone(), query.cosine(&e.vector)))
            .collect();
        Ok(RankedResult::from_scores(scored, k, RetrieverTag::Vector))
    }

    /// Okapi BM25; documents scoring zero are left out.
    pub fn search_bm25(&self, query: &str, k: usize, params: Bm25Params) -> Result<RankedResult, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        params.validate()?;
        let scored = self
            .lexical
            .score(query, params)
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(d, s)| (self.entries[&d].tool_id.clone(), s))
            .collect();
        Ok(RankedResult::from_scores(scored, k, RetrieverTag::Bm25))
    }

    /// Convex combination of min-max normalized vector and BM25 scores over
    /// the top `4k` candidates of each side. A candidate missing from one
    /// side scores 0 there.
    pub fn search_hybrid(
        &self,
        query: &str,
        query_vector: &EmbeddingVector,
        k: usize,
        alpha: f64,
        params: Bm25Params,
    ) -> Result<RankedResult, IndexError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(IndexError::InvalidAlpha(alpha));
        }
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        let pool = k.saturating_mul(CANDIDATE_POOL_FACTOR);
        let dense = self.search_vector(query_vector, pool)?;
        let lexical = self.search_bm25(query, pool, params)?;
        let mut fused: BTreeMap<String, f64> = BTreeMap::new();
        for (list, weight) in [(&dense, alpha), (&lexical, 1.0 - alpha)] {
            for (id, norm) in min_max_normalize(list) {
                *fused.entry(id).or_insert(0.0) += weight * norm;
            }
        }
        Ok(RankedResult::from_scores(fused.into_iter().collect(), k, RetrieverTag::Hybrid))
    }
}

/// Rescales scores to [0, 1]. A list whose scores are all equal (including a
/// singleton) maps to 1.
pub fn min_max_normalize(result: &RankedResult) -> Vec<(String, f64)> {
    let Some(max) = result.items.iter().map(|i| i.score).max_by(f64::total_cmp) else {
        return Vec::new();
    };
    let min = result.items.iter().map(|i| i.score).min_by(f64::total_cmp).unwrap_or(max);
    let span = max - min;
    result
        .items
        .iter()
        .map(|i| {
            let n = if span > 0.0 { (i.score - min) / span } else { 1.0 };
            (i.tool_id.clone(), n)
        })
        .collect()
}
