//! The retrieval capability served as the single MCP tool `get_mcp_servers`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::server::{ToolDescriptor, ToolOutcome, ToolService};
use crate::embedding::EmbeddingStrategy;
use crate::index::{IdentityReranker, Reranker, Retriever};
use crate::retrieval::{search, SearchOptions};
use crate::sync::SharedStore;

pub const RETRIEVAL_TOOL: &str = "get_mcp_servers";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalSettings {
    pub k: usize,
    pub options: SearchOptions,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        Self { k: 5, options: SearchOptions::default() }
    }
}

pub struct RetrievalService {
    store: Arc<SharedStore>,
    embedder: EmbeddingStrategy,
    reranker: Arc<dyn Reranker>,
    settings: RetrievalSettings,
}

impl RetrievalService {
    pub fn new(store: Arc<SharedStore>, embedder: EmbeddingStrategy, settings: RetrievalSettings) -> Self {
        Self { store, embedder, reranker: Arc::new(IdentityReranker), settings }
    }

    pub fn with_reranker(mut self, reranker: Arc<dyn Reranker>) -> Self {
        self.reranker = reranker;
        self
    }

    pub fn settings(&self) -> &RetrievalSettings {
        &self.settings
    }

    fn retrieve(&self, arguments: &Map<String, Value>) -> Result<Value, String> {
        let query = match arguments.get("query") {
            Some(Value::String(q)) if !q.trim().is_empty() => q.as_str(),
            Some(Value::String(_)) => return Err("`query` must not be empty".into()),
            _ => return Err("`query` is required and must be a string".into()),
        };
        let k = match arguments.get("k") {
            None | Some(Value::Null) => self.settings.k,
            Some(v) => match v.as_u64() {
                Some(k) if k >= 1 => k as usize,
                _ => return Err("`k` must be a positive integer".into()),
            },
        };
        let mut options = self.settings.options;
        match arguments.get("retriever") {
            None | Some(Value::Null) => {}
            Some(Value::String(r)) => options.retriever = r.parse()?,
            Some(_) => return Err("`retriever` must be a string".into()),
        }
        if let Some(extra) = arguments.keys().find(|key| !["query", "k", "retriever"].contains(&key.as_str())) {
            return Err(format!("unknown argument `{extra}`"));
        }
        let store = self.store.snapshot();
        let ranked = search(&store.index, &self.embedder, self.reranker.as_ref(), query, k, &options)
            .map_err(|e| e.to_string())?;
        let tools: Vec<Value> = ranked
            .items
            .iter()
            .filter_map(|item| store.index.get_by_tool_id(&item.tool_id).map(|e| (e, item.score)))
            .map(|(entry, score)| {
                let doc = entry.to_document();
                json!({
                    "name": doc.name,
                    "description": doc.description,
                    "inputSchema": doc.input_schema(),
                    "server": doc.origin_server,
                    "score": score,
                })
            })
            .collect();
        Ok(json!({ "tools": tools }))
    }
}

impl ToolService for RetrievalService {
    fn server_name(&self) -> &str {
        "tooldex-retrieval"
    }

    fn tools(&self) -> Vec<ToolDescriptor> {
        let retrievers: Vec<&str> = Retriever::ALL.iter().map(|r| r.as_str()).collect();
        vec![ToolDescriptor {
            name: RETRIEVAL_TOOL.into(),
            description: "Search the knowledge base of MCP tools. Pass a query describing one tool you need; \
                          returns the best matching tools with their names, descriptions and input schemas."
                .into(),
            input_schema: json!({
                "type": "object",
                "properties": {
                    "query": { "type": "string", "description": "What the tool should do" },
                    "k": { "type": "integer", "description": "How many tools to return", "default": self.settings.k },
                    "retriever": {
                        "type": "string",
                        "enum": retrievers,
                        "description": "Retriever chain",
                        "default": self.settings.options.retriever.as_str(),
                    },
                },
                "required": ["query"],
            }),
        }]
    }

    fn call(&self, name: &str, arguments: &Map<String, Value>) -> ToolOutcome {
        if name != RETRIEVAL_TOOL {
            return ToolOutcome::Err(format!("unknown tool `{name}`"));
        }
        match self.retrieve(arguments) {
            Ok(v) => ToolOutcome::Ok(v),
            Err(e) => ToolOutcome::Err(e),
        }
    }
}
