use std::collections::HashMap;
use std::sync::RwLock;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbeddingError, EmbeddingProvider};
use crate::text::{fnv1a64, tokenize};

pub const DEFAULT_TOKEN_HASH_DIMENSION: usize = 256;

/// Bag-of-words embedder: each token is hashed into one of `dimension`
/// buckets, counts are accumulated and the vector is L2-normalized.
/// Text without any token embeds to the zero vector.
#[derive(Debug, Clone)]
pub struct TokenHashProvider {
    dimension: usize,
    model_id: String,
}

impl TokenHashProvider {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "token-hash dimension must be positive");
        Self { dimension, model_id: format!("token-hash-{dimension}") }
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize(text) {
            let bucket = (fnv1a64(token.as_bytes()) % self.dimension as u64) as usize;
            v[bucket] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl Default for TokenHashProvider {
    fn default() -> Self {
        Self::new(DEFAULT_TOKEN_HASH_DIMENSION)
    }
}

impl EmbeddingProvider for TokenHashProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: &'a str,
    input: &'a [&'a str],
}

#[derive(Deserialize)]
struct RemoteResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for an HTTP embedding endpoint speaking
/// `{"model", "input": [..]}` -> `{"vectors": [[..]]}`.
pub struct RemoteProvider {
    endpoint: String,
    model: String,
    dimension: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dimension: usize, api_key: Option<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dimension,
            api_key,
            agent,
        }
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn model_id(&self) -> &str {
        &self.model
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let unavailable = |e: ureq::Error| EmbeddingError::ProviderUnavailable(e.to_string());
        let mut resp = req
            .send_json(RemoteRequest { model: &self.model, input: texts })
            .map_err(unavailable)?;
        let body: RemoteResponse = resp.body_mut().read_json().map_err(unavailable)?;
        Ok(body.vectors)
    }
}

type CacheKey = (String, [u8; 32]);

/// Memoizes another provider by `(model id, SHA-256 of text)`.
pub struct CachedProvider<P> {
    inner: P,
    cache: RwLock<HashMap<CacheKey, Vec<f64>>>,
}

impl<P: EmbeddingProvider> CachedProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("embedding cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(&self, text: &str) -> CacheKey {
        (self.inner.model_id().to_owned(), Sha256::digest(text.as_bytes()).into())
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedProvider<P> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let keys: Vec<CacheKey> = texts.iter().map(|t| self.key(t)).collect();
        let mut out: Vec<Option<Vec<f64>>> = {
            let cache = self.cache.read().expect("embedding cache poisoned");
            keys.iter().map(|k| cache.get(k).cloned()).collect()
        };
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fetched = self.inner.embed_batch(&batch)?;
            if fetched.len() != batch.len() {
                return Err(EmbeddingError::CountMismatch { expected: batch.len(), actual: fetched.len() });
            }
            let mut cache = self.cache.write().expect("embedding cache poisoned");
            for (i, v) in missing.into_iter().zip(fetched) {
                // first writer wins so concurrent callers observe one vector per text
                let stored = cache.entry(keys[i].clone()).or_insert(v);
                out[i] = Some(stored.clone());
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
    }
}
