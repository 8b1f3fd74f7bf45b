//! Okapi BM25 over an incrementally maintained inverted index.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::IndexError;
use crate::text::tokenize;
use crate::tool_model::ToolHash;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), IndexError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) || !(0.0..=1.0).contains(&self.b) {
            return Err(IndexError::InvalidParams(format!("k1={} b={}", self.k1, self.b)));
        }
        Ok(())
    }
}

/// `ln(1 + (N - n + 0.5) / (n + 0.5))`, always positive.
pub fn idf(doc_count: usize, doc_freq: usize) -> f64 {
    let n = doc_count as f64;
    let df = doc_freq as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

pub fn term_score(idf: f64, tf: f64, doc_len: f64, avgdl: f64, params: Bm25Params) -> f64 {
    let norm = 1.0 - params.b + params.b * doc_len / avgdl;
    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// Corpus statistics; equal after any insert/remove history that leaves the
/// same documents behind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub total_tokens: usize,
    pub avgdl: f64,
    pub document_frequencies: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LexicalIndex {
    postings: HashMap<String, BTreeMap<ToolHash, u32>>,
    doc_len: HashMap<ToolHash, usize>,
    total_len: usize,
}

impl LexicalIndex {
    pub(crate) fn insert(&mut self, digest: ToolHash, text: &str) {
        let tokens = tokenize(text);
        self.total_len += tokens.len();
        self.doc_len.insert(digest, tokens.len());
        for t in tokens {
            *self.postings.entry(t).or_default().entry(digest).or_insert(0) += 1;
        }
    }

    pub(crate) fn remove(&mut self, digest: &ToolHash, text: &str) {
        let Some(len) = self.doc_len.remove(digest) else { return };
        self.total_len -= len;
        for t in tokenize(text).into_iter().collect::<BTreeSet<_>>() {
            if let Some(list) = self.postings.get_mut(&t) {
                list.remove(digest);
                if list.is_empty() {
                    self.postings.remove(&t);
                }
            }
        }
    }

    pub(crate) fn avgdl(&self) -> f64 {
        if self.doc_len.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.doc_len.len() as f64
        }
    }

    pub(crate) fn stats(&self) -> CorpusStats {
        CorpusStats {
            doc_count: self.doc_len.len(),
            total_tokens: self.total_len,
            avgdl: self.avgdl(),
            document_frequencies: self.postings.iter().map(|(t, p)| (t.clone(), p.len())).collect(),
        }
    }

    /// Scores every document containing at least one distinct query term.
    pub(crate) fn score(&self, query: &str, params: Bm25Params) -> HashMap<ToolHash, f64> {
        let mut scores = HashMap::new();
        let n = self.doc_len.len();
        let avgdl = self.avgdl();
        if n == 0 || avgdl == 0.0 {
            return scores;
        }
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        for term in terms {
            let Some(list) = self.postings.get(&term) else { continue };
            let term_idf = idf(n, list.len());
            for (digest, tf) in list {
                let len = self.doc_len[digest] as f64;
                *scores.entry(*digest).or_insert(0.0) += term_score(term_idf, f64::from(*tf), len, avgdl, params);
            }
        }
        scores
    }
}
