//! Wires a generated dataset into running parts: company servers behind a
//! gateway, a synced index and the retrieval server, all in process.

use std::collections::HashMap;
use std::sync::Arc;

use crate::dataset::Dataset;
use crate::embedding::EmbeddingStrategy;
use crate::index::Reranker;
use crate::mcp::{Gateway, InProcessTransport, McpClient, McpServer, MessageHandler, RetrievalService, RetrievalSettings};
use crate::sync::{full_sync, SharedStore, SyncError, SyncReport, ToolSource, ToolStore};

pub struct Workbench {
    pub store: Arc<SharedStore>,
    pub gateway: Gateway,
    pub retrieval: McpClient,
    pub embedder: EmbeddingStrategy,
    owners: HashMap<String, String>,
}

impl Workbench {
    /// Company servers come from `dataset`; the sidecar supplies its questions.
    pub fn in_process(
        dataset: &Dataset,
        embedder: EmbeddingStrategy,
        settings: RetrievalSettings,
        reranker: Option<Arc<dyn Reranker>>,
    ) -> Self {
        let sidecar = Arc::new(dataset.sidecar());
        let mut gateway = Gateway::new();
        for service in dataset.services() {
            let id = service.server().server_id.clone();
            let handler: Arc<dyn MessageHandler> = Arc::new(McpServer::new(service));
            let client = McpClient::new(&id, Box::new(InProcessTransport::new(&id, handler))).with_sidecar(Arc::clone(&sidecar));
            gateway.register(client).expect("server ids are unique slugs");
        }
        Self::with_gateway(gateway, embedder, settings, reranker, owners(dataset))
    }

    pub fn with_gateway(
        gateway: Gateway,
        embedder: EmbeddingStrategy,
        settings: RetrievalSettings,
        reranker: Option<Arc<dyn Reranker>>,
        owners: HashMap<String, String>,
    ) -> Self {
        let store = Arc::new(SharedStore::new(ToolStore::new(embedder.dimension())));
        let mut service = RetrievalService::new(Arc::clone(&store), embedder.clone(), settings);
        if let Some(r) = reranker {
            service = service.with_reranker(r);
        }
        let handler: Arc<dyn MessageHandler> = Arc::new(McpServer::new(service));
        let retrieval = McpClient::new("retrieval", Box::new(InProcessTransport::new("retrieval", handler)));
        Self { store, gateway, retrieval, embedder, owners }
    }

    /// Syncs the index against every registered server.
    pub fn sync(&self, force_reindex: bool) -> Result<SyncReport, SyncError> {
        let sources: Vec<&dyn ToolSource> = self.gateway.clients().iter().map(|c| c.as_ref() as &dyn ToolSource).collect();
        full_sync(&sources, &self.store, &self.embedder, force_reindex)
    }

    pub fn tool_server(&self, tool: &str) -> Option<String> {
        self.owners.get(tool).cloned()
    }
}

/// Tool name to owning server id.
pub fn owners(dataset: &Dataset) -> HashMap<String, String> {
    dataset.tools().map(|t| (t.name.clone(), t.origin_server.clone())).collect()
}
