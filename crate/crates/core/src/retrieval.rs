//! Query-side retriever chains over an [`IndexStore`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{EmbeddingError, EmbeddingStrategy};
use crate::index::{
    rerank_or_fallback, Bm25Params, IndexError, IndexStore, RankedResult, Reranker, Retriever, CANDIDATE_POOL_FACTOR,
    DEFAULT_ALPHA,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("query is empty")]
    EmptyQuery,
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub retriever: Retriever,
    pub alpha: f64,
    pub bm25: Bm25Params,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { retriever: Retriever::Vector, alpha: DEFAULT_ALPHA, bm25: Bm25Params::default() }
    }
}

/// Runs one retriever chain. `rerank` reorders the top `4k` vector
/// candidates and falls back to them if the reranker fails.
pub fn search(
    index: &IndexStore,
    strategy: &EmbeddingStrategy,
    reranker: &dyn Reranker,
    query: &str,
    k: usize,
    options: &SearchOptions,
) -> Result<RankedResult, RetrievalError> {
    if query.trim().is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    Ok(match options.retriever {
        Retriever::Bm25 => index.search_bm25(query, k, options.bm25)?,
        Retriever::Vector => index.search_vector(&strategy.embed_query(query)?, k)?,
        Retriever::Hybrid => {
            index.search_hybrid(query, &strategy.embed_query(query)?, k, options.alpha, options.bm25)?
        }
        Retriever::Rerank => {
            if k == 0 {
                return Err(IndexError::InvalidK.into());
            }
            let pool = index.search_vector(&strategy.embed_query(query)?, k.saturating_mul(CANDIDATE_POOL_FACTOR))?;
            rerank_or_fallback(pool, query, reranker, index, k)
        }
    })
}
