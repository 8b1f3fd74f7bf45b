use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::jsonrpc::{Request, Response};
use super::server::ToolDescriptor;
use super::transport::Transport;
use super::{GatewayError, ServerHandle, ServerStatus, ToolCallRecord, PROTOCOL_VERSION};
use crate::tool_model::ToolDocument;

/// Synthetic questions keyed by tool name. They are not part of the wire
/// protocol, so they travel next to it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sidecar(pub BTreeMap<String, Vec<String>>);

impl Sidecar {
    pub fn load(path: &Path) -> std::io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)
    }

    pub fn questions(&self, tool: &str) -> &[String] {
        self.0.get(tool).map(Vec::as_slice).unwrap_or_default()
    }
}

pub struct McpClient {
    server_id: String,
    transport: Box<dyn Transport>,
    sidecar: Option<Arc<Sidecar>>,
    next_id: AtomicU64,
    status: Mutex<ServerStatus>,
    server_info: Mutex<Option<Value>>,
}

impl McpClient {
    pub fn new(server_id: impl Into<String>, transport: Box<dyn Transport>) -> Self {
        Self {
            server_id: server_id.into(),
            transport,
            sidecar: None,
            next_id: AtomicU64::new(1),
            status: Mutex::new(ServerStatus::Unknown),
            server_info: Mutex::new(None),
        }
    }

    pub fn with_sidecar(mut self, sidecar: Arc<Sidecar>) -> Self {
        self.sidecar = Some(sidecar);
        self
    }

    pub fn server_id(&self) -> &str {
        &self.server_id
    }

    pub fn handle(&self) -> ServerHandle {
        ServerHandle {
            server_id: self.server_id.clone(),
            transport: self.transport.kind(),
            address: self.transport.address(),
            status: *self.status.lock().unwrap_or_else(|p| p.into_inner()),
        }
    }

    fn set_status(&self, status: ServerStatus) {
        *self.status.lock().unwrap_or_else(|p| p.into_inner()) = status;
    }

    fn protocol(&self, code: Option<i64>, message: impl Into<String>) -> GatewayError {
        GatewayError::ProtocolError { server: self.server_id.clone(), code, message: message.into() }
    }

    pub fn request(&self, method: &str, params: Option<Value>) -> Result<Value, GatewayError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let message = serde_json::to_value(Request::new(id, method, params)).expect("request serializes");
        let reply = match self.transport.send(&message) {
            Ok(Some(reply)) => reply,
            Ok(None) => return Err(self.protocol(None, format!("no reply to `{method}`"))),
            Err(e) => {
                self.set_status(ServerStatus::Unreachable);
                return Err(GatewayError::ServerUnreachable { server: self.server_id.clone(), message: e.0 });
            }
        };
        self.set_status(ServerStatus::Reachable);
        let response: Response =
            serde_json::from_value(reply).map_err(|e| self.protocol(None, format!("malformed response: {e}")))?;
        if response.id != json!(id) {
            return Err(self.protocol(None, format!("response id {} does not match request id {id}", response.id)));
        }
        response.into_result().map_err(|e| self.protocol(Some(e.code), e.message))
    }

    fn notify(&self, method: &str) -> Result<(), GatewayError> {
        let message = serde_json::to_value(Request::notification(method, None)).expect("request serializes");
        self.transport
            .send(&message)
            .map(|_| ())
            .map_err(|e| GatewayError::ServerUnreachable { server: self.server_id.clone(), message: e.0 })
    }

    /// Performs the handshake once; later calls return the cached result.
    pub fn initialize(&self) -> Result<Value, GatewayError> {
        let mut info = self.server_info.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(v) = info.as_ref() {
            return Ok(v.clone());
        }
        let result = self.request(
            "initialize",
            Some(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {},
                "clientInfo": { "name": "tooldex", "version": env!("CARGO_PKG_VERSION") },
            })),
        )?;
        self.notify("notifications/initialized")?;
        *info = Some(result.clone());
        Ok(result)
    }

    /// Raw `tools/list`, following pagination cursors.
    pub fn list_descriptors(&self) -> Result<Vec<ToolDescriptor>, GatewayError> {
        self.initialize()?;
        let mut tools = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let params = cursor.as_ref().map(|c| json!({ "cursor": c }));
            let result = self.request("tools/list", params)?;
            let page = result
                .get("tools")
                .cloned()
                .ok_or_else(|| self.protocol(None, "tools/list result has no `tools`"))?;
            let page: Vec<ToolDescriptor> =
                serde_json::from_value(page).map_err(|e| self.protocol(None, format!("malformed tool list: {e}")))?;
            tools.extend(page);
            match result.get("nextCursor").and_then(Value::as_str) {
                Some(next) if !next.is_empty() => cursor = Some(next.to_owned()),
                _ => break,
            }
        }
        Ok(tools)
    }

    /// `tools/list` mapped to tool documents owned by this server.
    pub fn list_tools(&self) -> Result<Vec<ToolDocument>, GatewayError> {
        self.list_descriptors()?
            .into_iter()
            .map(|t| {
                let parameters = ToolDocument::parameters_from_schema(&t.name, &t.input_schema)
                    .map_err(|e| self.protocol(None, e.to_string()))?;
                let synthetic_questions = self.sidecar.as_ref().map(|s| s.questions(&t.name).to_vec()).unwrap_or_default();
                let doc = ToolDocument {
                    tool_id: t.name.clone(),
                    name: t.name,
                    description: t.description,
                    parameters,
                    synthetic_questions,
                    origin_server: self.server_id.clone(),
                };
                doc.validate().map_err(|e| self.protocol(None, e.to_string()))?;
                Ok(doc)
            })
            .collect()
    }

    /// Tool-level failures, including JSON-RPC errors, land in
    /// `record.error`; only transport failures are returned as `Err`.
    pub fn call_tool(&self, name: &str, arguments: Map<String, Value>) -> Result<ToolCallRecord, GatewayError> {
        self.initialize()?;
        let started = Instant::now();
        let outcome = self.request("tools/call", Some(json!({ "name": name, "arguments": arguments })));
        let latency_ms = started.elapsed().as_millis() as u64;
        let mut record = ToolCallRecord {
            tool: name.to_owned(),
            server: self.server_id.clone(),
            arguments,
            result: None,
            error: None,
            latency_ms,
        };
        match outcome {
            Ok(result) => match parse_call_result(&result) {
                Ok(value) => record.result = Some(value),
                Err(message) => record.error = Some(message),
            },
            Err(e @ GatewayError::ServerUnreachable { .. }) => return Err(e),
            Err(e) => record.error = Some(e.to_string()),
        }
        Ok(record)
    }
}

fn content_text(result: &Value) -> String {
    result
        .get("content")
        .and_then(Value::as_array)
        .map(|parts| {
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(Value::as_str))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_or_default()
}

fn parse_call_result(result: &Value) -> Result<Value, String> {
    let text = content_text(result);
    if result.get("isError").and_then(Value::as_bool).unwrap_or(false) {
        return Err(if text.is_empty() { "tool reported an error".into() } else { text });
    }
    if let Some(structured) = result.get("structuredContent") {
        return Ok(structured.clone());
    }
    Ok(serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

/// Registered servers, in registration order.
#[derive(Default)]
pub struct Gateway {
    clients: Vec<Arc<McpClient>>,
    by_id: HashMap<String, usize>,
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, client: McpClient) -> Result<Arc<McpClient>, GatewayError> {
        let id = client.server_id().to_owned();
        if self.by_id.contains_key(&id) {
            return Err(GatewayError::DuplicateServer(id));
        }
        let client = Arc::new(client);
        self.by_id.insert(id, self.clients.len());
        self.clients.push(Arc::clone(&client));
        Ok(client)
    }

    pub fn clients(&self) -> &[Arc<McpClient>] {
        &self.clients
    }

    pub fn get(&self, server_id: &str) -> Option<&Arc<McpClient>> {
        self.by_id.get(server_id).map(|i| &self.clients[*i])
    }

    pub fn handles(&self) -> Vec<ServerHandle> {
        self.clients.iter().map(|c| c.handle()).collect()
    }

    /// Never fails: routing and transport problems become `record.error`.
    pub fn call(&self, server_id: &str, tool: &str, arguments: Map<String, Value>) -> ToolCallRecord {
        let Some(client) = self.get(server_id) else {
            return ToolCallRecord::failed(tool, server_id, arguments, GatewayError::UnknownServer(server_id.into()).to_string());
        };
        match client.call_tool(tool, arguments.clone()) {
            Ok(record) => record,
            Err(e) => ToolCallRecord::failed(tool, server_id, arguments, e.to_string()),
        }
    }
}
