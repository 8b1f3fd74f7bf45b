//! Embedding providers and tool-document embedding strategies.

mod provider;
mod strategy;

pub use provider::{CachedProvider, RemoteProvider, TokenHashProvider, DEFAULT_TOKEN_HASH_DIMENSION};
pub use strategy::{embed_concat, embed_tdwa, ComponentWeights, EmbeddedDocument, EmbeddingStrategy, StrategyKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weighted sums with a norm below this are treated as degenerate.
pub const ZERO_NORM_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider returned dimension {actual}, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("provider returned {actual} vectors for {expected} inputs")]
    CountMismatch { expected: usize, actual: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("weighted embedding has zero norm")]
    ZeroVector,
    #[error("tool `{0}` has no synthetic questions but the questions weight is positive")]
    MissingQuestions(String),
    #[error("invalid component weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::DimensionMismatch { expected: 1, actual: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Cosine similarity; zero-norm operands score 0.
    pub fn cosine(&self, other: &Self) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }

    pub fn normalized(&self) -> Result<Self, EmbeddingError> {
        let n = self.norm();
        if n < ZERO_NORM_EPSILON {
            return Err(EmbeddingError::ZeroVector);
        }
        Ok(Self(self.0.iter().map(|v| v / n).collect()))
    }
}

/// A deterministic text-embedding backend.
///
/// Implementations must return the same vector for the same text on every
/// call; remote models that are not deterministic should be wrapped in a
/// [`CachedProvider`].
pub trait EmbeddingProvider: Send + Sync {
    fn model_id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

pub fn embed_text(provider: &dyn EmbeddingProvider, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
    let mut out = embed_texts(provider, &[text])?;
    Ok(out.remove(0))
}

/// Embeds a batch and checks count, dimension and finiteness of the reply.
pub fn embed_texts(provider: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(EmbeddingError::EmptyText);
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let raw = provider.embed_batch(texts)?;
    if raw.len() != texts.len() {
        return Err(EmbeddingError::CountMismatch { expected: texts.len(), actual: raw.len() });
    }
    raw.into_iter()
        .map(|values| {
            if values.len() != provider.dimension() {
                return Err(EmbeddingError::DimensionMismatch {
                    expected: provider.dimension(),
                    actual: values.len(),
                });
            }
            EmbeddingVector::new(values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Broken(usize);

    impl EmbeddingProvider for Broken {
        fn model_id(&self) -> &str {
            "broken"
        }
        fn dimension(&self) -> usize {
            4
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
            Ok(texts.iter().map(|_| vec![1.0; self.0]).collect())
        }
    }

    #[test]
    fn empty_text_rejected_before_provider() {
        assert_eq!(embed_text(&Broken(4), ""), Err(EmbeddingError::EmptyText));
        assert_eq!(embed_text(&Broken(4), "  "), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn wrong_dimension_detected() {
        assert_eq!(
            embed_text(&Broken(3), "x"),
            Err(EmbeddingError::DimensionMismatch { expected: 4, actual: 3 })
        );
        assert!(embed_text(&Broken(4), "x").is_ok());
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        let z = EmbeddingVector::new(vec![0.0, 0.0]).unwrap();
        let a = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(z.cosine(&a), 0.0);
        assert_eq!(z.normalized(), Err(EmbeddingError::ZeroVector));
        assert!(EmbeddingVector::new(vec![f64::NAN]).is_err());
    }
}
