//! Model Context Protocol: the JSON-RPC subset (`initialize`, `tools/list`,
//! `tools/call`) over stdio, HTTP and in-process transports, in both the
//! client and server direction.

mod client;
mod http;
pub mod jsonrpc;
mod retrieval;
mod server;
mod transport;

pub use client::{Gateway, McpClient, Sidecar};
pub use http::{serve_http, HttpServerHandle};
pub use retrieval::{RetrievalService, RetrievalSettings, RETRIEVAL_TOOL};
pub use server::{call_result, serve_stdio, McpServer, MessageHandler, ToolDescriptor, ToolOutcome, ToolService};
pub use transport::{HttpTransport, InProcessTransport, StdioTransport, Transport, TransportError, TransportKind};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub const PROTOCOL_VERSION: &str = "2024-11-05";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("server `{server}` unreachable: {message}")]
    ServerUnreachable { server: String, message: String },
    #[error("protocol error from `{server}`{}: {message}", code.map(|c| format!(" ({c})")).unwrap_or_default())]
    ProtocolError { server: String, code: Option<i64>, message: String },
    #[error("server `{0}` is already registered")]
    DuplicateServer(String),
    #[error("no server `{0}` is registered")]
    UnknownServer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerStatus {
    Unknown,
    Reachable,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerHandle {
    pub server_id: String,
    pub transport: TransportKind,
    pub address: String,
    pub status: ServerStatus,
}

/// One `tools/call` exchange. Exactly one of `result` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCallRecord {
    pub tool: String,
    pub server: String,
    pub arguments: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
}

impl ToolCallRecord {
    pub fn failed(tool: &str, server: &str, arguments: Map<String, Value>, error: impl Into<String>) -> Self {
        Self {
            tool: tool.to_owned(),
            server: server.to_owned(),
            arguments,
            result: None,
            error: Some(error.into()),
            latency_ms: 0,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}
