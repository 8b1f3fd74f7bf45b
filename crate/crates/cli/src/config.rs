//! The TOML configuration file and its command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tooldex_core::dataset::SQ_COUNTS;
use tooldex_core::embedding::{ComponentWeights, StrategyKind};
use tooldex_core::index::Retriever;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Concat,
    Tdwa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderName {
    TokenHash,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub strategy: StrategyName,
    /// name, description, parameters, questions. Used by `tdwa`.
    pub weights: [f64; 4],
    pub sq: usize,
    pub provider: ProviderName,
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub model: Option<String>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyName::Concat,
            weights: ComponentWeights::VAR_2.as_array(),
            sq: 10,
            provider: ProviderName::TokenHash,
            dimension: 256,
            endpoint: None,
            model: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn kind(&self) -> anyhow::Result<StrategyKind> {
        Ok(match self.strategy {
            StrategyName::Concat => StrategyKind::Concat,
            StrategyName::Tdwa => StrategyKind::Tdwa(ComponentWeights::try_from(self.weights)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrievalConfig {
    pub retriever: Retriever,
    pub alpha: f64,
    pub k: usize,
    pub reranker_endpoint: Option<String>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self { retriever: Retriever::Vector, alpha: 0.5, k: 5, reranker_endpoint: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointsConfig {
    /// Task-completion judge; the containment judge is used when unset.
    pub judge: Option<String>,
    /// Chat-completions endpoint for the remote planner.
    pub planner: Option<String>,
    pub planner_model: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerTransport {
    Http,
    Stdio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub id: String,
    pub transport: ServerTransport,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default)]
    pub command: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub index: PathBuf,
    pub dataset: PathBuf,
    pub seed: u64,
    pub embedding: EmbeddingConfig,
    pub retrieval: RetrievalConfig,
    pub endpoints: EndpointsConfig,
    pub servers: Vec<ServerConfig>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            index: PathBuf::from("tooldex-index"),
            dataset: PathBuf::from("tooldex-data"),
            seed: 7,
            embedding: EmbeddingConfig::default(),
            retrieval: RetrievalConfig::default(),
            endpoints: EndpointsConfig::default(),
            servers: Vec::new(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if !SQ_COUNTS.contains(&self.embedding.sq) {
            bail!("embedding.sq must be one of 0, 5, 10 (got {})", self.embedding.sq);
        }
        self.embedding.kind()?;
        if self.embedding.dimension == 0 {
            bail!("embedding.dimension must be positive");
        }
        if self.embedding.provider == ProviderName::Remote
            && (self.embedding.endpoint.is_none() || self.embedding.model.is_none())
        {
            bail!("the remote embedding provider needs embedding.endpoint and embedding.model");
        }
        if self.retrieval.k == 0 {
            bail!("retrieval.k must be positive");
        }
        if !(0.0..=1.0).contains(&self.retrieval.alpha) {
            bail!("retrieval.alpha must lie in [0, 1]");
        }
        let mut ids = std::collections::HashSet::new();
        for s in &self.servers {
            if !ids.insert(&s.id) {
                bail!("server `{}` is listed twice", s.id);
            }
            match s.transport {
                ServerTransport::Http if s.url.is_none() => bail!("server `{}` needs a url", s.id),
                ServerTransport::Stdio if s.command.is_empty() => bail!("server `{}` needs a command", s.id),
                _ => {}
            }
        }
        Ok(())
    }
}
