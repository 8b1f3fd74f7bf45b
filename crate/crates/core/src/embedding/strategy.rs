use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{embed_text, embed_texts, EmbeddingError, EmbeddingProvider, EmbeddingVector, ZERO_NORM_EPSILON};
use crate::tool_model::ToolDocument;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Per-component weights for the weighted-average strategy, in the order
/// name, description, parameters, synthetic questions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ComponentWeights {
    pub name: f64,
    pub description: f64,
    pub parameters: f64,
    pub questions: f64,
}

impl ComponentWeights {
    /// `[0.2, 0.2, 0.2, 0.4]`
    pub const VAR_1: Self = Self { name: 0.2, description: 0.2, parameters: 0.2, questions: 0.4 };
    /// `[0.2, 0.3, 0, 0.5]`
    pub const VAR_2: Self = Self { name: 0.2, description: 0.3, parameters: 0.0, questions: 0.5 };

    pub fn new(name: f64, description: f64, parameters: f64, questions: f64) -> Result<Self, EmbeddingError> {
        let w = Self { name, description, parameters, questions };
        let arr = w.as_array();
        if arr.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
            return Err(EmbeddingError::InvalidWeights(format!("{arr:?}: each weight must lie in [0, 1]")));
        }
        let sum: f64 = arr.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(EmbeddingError::InvalidWeights(format!("{arr:?}: weights sum to {sum}, not 1")));
        }
        Ok(w)
    }

    /// Rescales arbitrary nonnegative weights so they sum to one.
    pub fn normalized_from(raw: [f64; 4]) -> Result<Self, EmbeddingError> {
        if raw.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(EmbeddingError::InvalidWeights(format!("{raw:?}: weights must be nonnegative")));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(EmbeddingError::InvalidWeights("all weights are zero".into()));
        }
        Self::new(raw[0] / sum, raw[1] / sum, raw[2] / sum, raw[3] / sum)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.name, self.description, self.parameters, self.questions]
    }
}

impl TryFrom<[f64; 4]> for ComponentWeights {
    type Error = EmbeddingError;

    fn try_from(a: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl From<ComponentWeights> for [f64; 4] {
    fn from(w: ComponentWeights) -> Self {
        w.as_array()
    }
}

impl FromStr for ComponentWeights {
    type Err = EmbeddingError;

    /// Parses `w1,w2,w3,w4`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EmbeddingError::InvalidWeights(format!("`{s}`: {e}")))?;
        let arr: [f64; 4] = parts
            .try_into()
            .map_err(|_| EmbeddingError::InvalidWeights(format!("`{s}`: expected four comma-separated weights")))?;
        Self::try_from(arr)
    }
}

impl fmt::Display for ComponentWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.name, self.description, self.parameters, self.questions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyKind {
    Concat,
    Tdwa(ComponentWeights),
}

impl StrategyKind {
    pub fn label(&self) -> String {
        match self {
            StrategyKind::Concat => "concat".into(),
            StrategyKind::Tdwa(w) if *w == ComponentWeights::VAR_1 => "tdwa-var-1".into(),
            StrategyKind::Tdwa(w) if *w == ComponentWeights::VAR_2 => "tdwa-var-2".into(),
            StrategyKind::Tdwa(w) => format!("tdwa[{w}]"),
        }
    }
}

/// Vector plus the exact text the strategy consumed, which also feeds the
/// lexical index.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDocument {
    pub vector: EmbeddingVector,
    pub lexical_text: String,
}

#[derive(Clone)]
pub struct EmbeddingStrategy {
    kind: StrategyKind,
    provider: Arc<dyn EmbeddingProvider>,
}

impl fmt::Debug for EmbeddingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingStrategy")
            .field("kind", &self.kind)
            .field("model", &self.provider.model_id())
            .finish()
    }
}

impl EmbeddingStrategy {
    pub fn new(kind: StrategyKind, provider: Arc<dyn EmbeddingProvider>) -> Self {
        Self { kind, provider }
    }

    pub fn concat(provider: Arc<dyn EmbeddingProvider>) -> Self {
        Self::new(StrategyKind::Concat, provider)
    }

    pub fn tdwa(weights: ComponentWeights, provider: Arc<dyn EmbeddingProvider>) -> Self {
        Self::new(StrategyKind::Tdwa(weights), provider)
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn provider(&self) -> &Arc<dyn EmbeddingProvider> {
        &self.provider
    }

    pub fn dimension(&self) -> usize {
        self.provider.dimension()
    }

    /// Identifies the vector space an index was built in.
    pub fn fingerprint(&self) -> String {
        format!("{}@{}", self.kind.label(), self.provider.model_id())
    }

    pub fn embed_document(&self, doc: &ToolDocument) -> Result<EmbeddedDocument, EmbeddingError> {
        match self.kind {
            StrategyKind::Concat => Ok(EmbeddedDocument {
                vector: embed_concat(doc, self.provider.as_ref())?,
                lexical_text: concat_text(doc),
            }),
            StrategyKind::Tdwa(w) => Ok(EmbeddedDocument {
                vector: embed_tdwa(doc, &w, self.provider.as_ref())?,
                lexical_text: weighted_components(doc, &w)?
                    .into_iter()
                    .map(|(text, _)| text)
                    .collect::<Vec<_>>()
                    .join("\n"),
            }),
        }
    }

    pub fn embed_query(&self, query: &str) -> Result<EmbeddingVector, EmbeddingError> {
        embed_text(self.provider.as_ref(), query)
    }
}

fn concat_text(doc: &ToolDocument) -> String {
    let mut text = format!("{}\n{}\n{}", doc.name, doc.description, doc.canonical_parameters());
    for q in &doc.synthetic_questions {
        text.push('\n');
        text.push_str(q);
    }
    text
}

/// Embeds every component joined into one text, then L2-normalizes.
pub fn embed_concat(doc: &ToolDocument, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector, EmbeddingError> {
    embed_text(provider, &concat_text(doc))?.normalized()
}

/// Components with strictly positive weight. The questions weight is split
/// evenly across the individual synthetic questions.
fn weighted_components(doc: &ToolDocument, w: &ComponentWeights) -> Result<Vec<(String, f64)>, EmbeddingError> {
    let mut parts = Vec::new();
    if w.name > 0.0 {
        parts.push((doc.name.clone(), w.name));
    }
    if w.description > 0.0 {
        parts.push((doc.description.clone(), w.description));
    }
    if w.parameters > 0.0 {
        parts.push((doc.canonical_parameters(), w.parameters));
    }
    if w.questions > 0.0 {
        if doc.synthetic_questions.is_empty() {
            return Err(EmbeddingError::MissingQuestions(doc.tool_id.clone()));
        }
        let share = w.questions / doc.synthetic_questions.len() as f64;
        parts.extend(doc.synthetic_questions.iter().map(|q| (q.clone(), share)));
    }
    Ok(parts)
}

/// Tool Document Weighted Average: `z = sum(w_i * Embed(c_i))`, scaled to
/// unit length. Zero-weight components are never sent to the provider.
pub fn embed_tdwa(
    doc: &ToolDocument,
    weights: &ComponentWeights,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingVector, EmbeddingError> {
    let parts = weighted_components(doc, weights)?;
    let texts: Vec<&str> = parts.iter().map(|(t, _)| t.as_str()).collect();
    let vectors = embed_texts(provider, &texts)?;
    let mut sum = vec![0.0; provider.dimension()];
    for ((_, weight), v) in parts.iter().zip(&vectors) {
        for (acc, x) in sum.iter_mut().zip(v.values()) {
            *acc += weight * x;
        }
    }
    let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < ZERO_NORM_EPSILON {
        return Err(EmbeddingError::ZeroVector);
    }
    EmbeddingVector::new(sum.into_iter().map(|x| x / norm).collect())
}
