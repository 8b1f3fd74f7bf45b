//! Binary-relevance ranking metrics.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// Golden tools for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceJudgment {
    pub query_id: String,
    pub golden: BTreeSet<String>,
}

impl RelevanceJudgment {
    /// `None` when the golden set is empty.
    pub fn new<I, S>(query_id: impl Into<String>, golden: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let golden: BTreeSet<String> = golden.into_iter().map(Into::into).collect();
        (!golden.is_empty()).then(|| Self { query_id: query_id.into(), golden })
    }

    fn hits<'a, S: AsRef<str>>(&'a self, ranking: &'a [S], k: usize) -> impl Iterator<Item = bool> + 'a {
        let mut seen = BTreeSet::new();
        ranking
            .iter()
            .take(k)
            .map(move |id| self.golden.contains(id.as_ref()) && seen.insert(id.as_ref().to_owned()))
    }
}

pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judgment: &RelevanceJudgment, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let dcg: f64 = judgment
        .hits(ranking, k)
        .enumerate()
        .filter(|(_, hit)| *hit)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum();
    let ideal: f64 = (0..k.min(judgment.golden.len())).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
    dcg / ideal
}

pub fn recall_at_k<S: AsRef<str>>(ranking: &[S], judgment: &RelevanceJudgment, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    judgment.hits(ranking, k).filter(|h| *h).count() as f64 / judgment.golden.len() as f64
}

/// Average precision over the relevant positions in the top `k`,
/// normalized by `min(k, |golden|)`.
pub fn map_at_k<S: AsRef<str>>(ranking: &[S], judgment: &RelevanceJudgment, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, hit) in judgment.hits(ranking, k).enumerate() {
        if hit {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    sum / k.min(judgment.golden.len()) as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub ndcg: f64,
    pub recall: f64,
    pub map: f64,
}

impl MetricTriple {
    pub fn compute<S: AsRef<str>>(ranking: &[S], judgment: &RelevanceJudgment, k: usize) -> Self {
        Self {
            ndcg: ndcg_at_k(ranking, judgment, k),
            recall: recall_at_k(ranking, judgment, k),
            map: map_at_k(ranking, judgment, k),
        }
    }

    /// Arithmetic mean; zeros for an empty slice.
    pub fn mean(items: &[MetricTriple]) -> Self {
        if items.is_empty() {
            return Self::default();
        }
        let n = items.len() as f64;
        Self {
            ndcg: items.iter().map(|m| m.ndcg).sum::<f64>() / n,
            recall: items.iter().map(|m| m.recall).sum::<f64>() / n,
            map: items.iter().map(|m| m.map).sum::<f64>() / n,
        }
    }
}
