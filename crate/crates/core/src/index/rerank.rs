//! Second-stage reranking contract.

use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IndexStore, RankedItem, RankedResult, RetrieverTag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RerankError {
    #[error("reranker unavailable: {0}")]
    Unavailable(String),
    #[error("reranker returned an invalid ranking: {0}")]
    InvalidResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerankDocument {
    pub id: String,
    pub text: String,
}

/// Assigns a score to some or all candidate documents for `query`.
pub trait Reranker: Send + Sync {
    fn id(&self) -> &str;

    /// Returns `(id, score)` pairs, best first. Ids must come from `documents`.
    fn score(&self, query: &str, documents: &[RerankDocument], prior: &RankedResult) -> Result<Vec<(String, f64)>, RerankError>;
}

/// Passes candidates through with their first-stage scores.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityReranker;

impl Reranker for IdentityReranker {
    fn id(&self) -> &str {
        "identity"
    }

    fn score(&self, _query: &str, _documents: &[RerankDocument], prior: &RankedResult) -> Result<Vec<(String, f64)>, RerankError> {
        Ok(prior.items.iter().map(|i| (i.tool_id.clone(), i.score)).collect())
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    query: &'a str,
    documents: &'a [RerankDocument],
}

#[derive(Deserialize)]
struct RemoteScore {
    id: String,
    score: f64,
}

#[derive(Deserialize)]
struct RemoteResponse {
    scores: Vec<RemoteScore>,
}

/// Scores candidates through an HTTP endpoint speaking
/// `{"query", "documents": [{"id", "text"}]}` -> `{"scores": [{"id", "score"}]}`.
pub struct RemoteReranker {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteReranker {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self { endpoint: endpoint.into(), api_key, agent }
    }
}

impl Reranker for RemoteReranker {
    fn id(&self) -> &str {
        &self.endpoint
    }

    fn score(&self, query: &str, documents: &[RerankDocument], _prior: &RankedResult) -> Result<Vec<(String, f64)>, RerankError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let unavailable = |e: ureq::Error| RerankError::Unavailable(e.to_string());
        let mut resp = req.send_json(RemoteRequest { query, documents }).map_err(unavailable)?;
        let body: RemoteResponse = resp.body_mut().read_json().map_err(unavailable)?;
        Ok(body.scores.into_iter().map(|s| (s.id, s.score)).collect())
    }
}

/// Reorders `candidates` with `reranker`, keeping at most `k` items.
///
/// The reranker may drop candidates but may not invent or repeat ids.
/// Items are ordered by reranker score; equal scores keep the reranker's
/// order.
pub fn rerank(
    candidates: &RankedResult,
    query: &str,
    reranker: &dyn Reranker,
    index: &IndexStore,
    k: usize,
) -> Result<RankedResult, RerankError> {
    let documents: Vec<RerankDocument> = candidates
        .items
        .iter()
        .map(|i| RerankDocument {
            id: i.tool_id.clone(),
            text: index.get_by_tool_id(&i.tool_id).map(|e| e.lexical_text.clone()).unwrap_or_default(),
        })
        .collect();
    let known: HashSet<&str> = candidates.items.iter().map(|i| i.tool_id.as_str()).collect();
    let mut seen = HashSet::new();
    let mut scored = reranker.score(query, &documents, candidates)?;
    for (id, score) in &scored {
        if !known.contains(id.as_str()) {
            return Err(RerankError::InvalidResponse(format!("unknown id `{id}`")));
        }
        if !seen.insert(id.clone()) {
            return Err(RerankError::InvalidResponse(format!("id `{id}` returned twice")));
        }
        if !score.is_finite() {
            return Err(RerankError::InvalidResponse(format!("non-finite score for `{id}`")));
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(k);
    Ok(RankedResult {
        items: scored.into_iter().map(|(tool_id, score)| RankedItem { tool_id, score }).collect(),
        retriever: RetrieverTag::Reranked,
    })
}

/// Like [`rerank`], but hands back the first-stage candidates (cut to `k`)
/// when the reranker fails.
pub fn rerank_or_fallback(
    candidates: RankedResult,
    query: &str,
    reranker: &dyn Reranker,
    index: &IndexStore,
    k: usize,
) -> RankedResult {
    match rerank(&candidates, query, reranker, index, k) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("reranker {} failed, keeping first-stage order: {e}", reranker.id());
            let mut c = candidates;
            c.items.truncate(k);
            c
        }
    }
}
