//! Server side of the protocol: method dispatch over a [`ToolService`].

use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::jsonrpc::{self, Request, Response, RpcError};
use super::PROTOCOL_VERSION;

/// One advertised tool, as it appears in a `tools/list` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(rename = "inputSchema", default)]
    pub input_schema: Value,
}

/// Tool-level outcome; failures become `isError` results, not RPC errors.
#[derive(Debug, Clone, PartialEq)]
pub enum ToolOutcome {
    Ok(Value),
    Err(String),
}

pub trait ToolService: Send + Sync {
    fn server_name(&self) -> &str;
    fn tools(&self) -> Vec<ToolDescriptor>;
    fn call(&self, name: &str, arguments: &Map<String, Value>) -> ToolOutcome;
}

/// Anything that turns one incoming message into at most one reply.
pub trait MessageHandler: Send + Sync {
    fn handle(&self, message: Value) -> Option<Value>;
}

pub struct McpServer<S> {
    service: S,
}

impl<S: ToolService> McpServer<S> {
    pub fn new(service: S) -> Self {
        Self { service }
    }

    pub fn service(&self) -> &S {
        &self.service
    }

    pub fn handle_line(&self, line: &str) -> Option<String> {
        let reply = match serde_json::from_str::<Value>(line) {
            Ok(v) => self.handle(v)?,
            Err(e) => error_value(Value::Null, RpcError::new(jsonrpc::PARSE_ERROR, e.to_string())),
        };
        Some(reply.to_string())
    }

    fn dispatch(&self, req: Request) -> Result<Value, RpcError> {
        match req.method.as_str() {
            "initialize" => Ok(json!({
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": { "tools": { "listChanged": false } },
                "serverInfo": { "name": self.service.server_name(), "version": env!("CARGO_PKG_VERSION") },
            })),
            "ping" => Ok(json!({})),
            "tools/list" => Ok(json!({ "tools": self.service.tools() })),
            "tools/call" => {
                let params = req.params.unwrap_or(Value::Null);
                let name = params
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| RpcError::new(jsonrpc::INVALID_PARAMS, "tools/call requires a string `name`"))?;
                let empty = Map::new();
                let arguments = match params.get("arguments") {
                    None | Some(Value::Null) => &empty,
                    Some(Value::Object(m)) => m,
                    Some(_) => return Err(RpcError::new(jsonrpc::INVALID_PARAMS, "`arguments` must be an object")),
                };
                Ok(call_result(self.service.call(name, arguments)))
            }
            other => Err(RpcError::new(jsonrpc::METHOD_NOT_FOUND, format!("method `{other}` not found"))),
        }
    }
}

fn error_value(id: Value, error: RpcError) -> Value {
    serde_json::to_value(Response::failure(id, error)).expect("response serializes")
}

pub fn call_result(outcome: ToolOutcome) -> Value {
    match outcome {
        ToolOutcome::Ok(value) => {
            let text = match &value {
                Value::String(s) => s.clone(),
                v => v.to_string(),
            };
            let mut result = json!({ "content": [{ "type": "text", "text": text }], "isError": false });
            if value.is_object() {
                result["structuredContent"] = value;
            }
            result
        }
        ToolOutcome::Err(message) => json!({ "content": [{ "type": "text", "text": message }], "isError": true }),
    }
}

impl<S: ToolService> MessageHandler for McpServer<S> {
    fn handle(&self, message: Value) -> Option<Value> {
        if let Value::Array(batch) = message {
            if batch.is_empty() {
                return Some(error_value(Value::Null, RpcError::new(jsonrpc::INVALID_REQUEST, "empty batch")));
            }
            let replies: Vec<Value> = batch.into_iter().filter_map(|m| self.handle(m)).collect();
            return (!replies.is_empty()).then_some(Value::Array(replies));
        }
        let id = message.get("id").cloned().unwrap_or(Value::Null);
        let req: Request = match serde_json::from_value(message) {
            Ok(r) => r,
            Err(e) => return Some(error_value(id, RpcError::new(jsonrpc::INVALID_REQUEST, e.to_string()))),
        };
        if req.jsonrpc != jsonrpc::VERSION {
            return Some(error_value(id, RpcError::new(jsonrpc::INVALID_REQUEST, "jsonrpc must be \"2.0\"")));
        }
        let Some(id) = req.id.clone() else {
            // Notifications (e.g. notifications/initialized) get no reply.
            return None;
        };
        let response = match self.dispatch(req) {
            Ok(result) => Response::success(id, result),
            Err(e) => Response::failure(id, e),
        };
        Some(serde_json::to_value(response).expect("response serializes"))
    }
}

impl<T: MessageHandler + ?Sized> MessageHandler for Arc<T> {
    fn handle(&self, message: Value) -> Option<Value> {
        (**self).handle(message)
    }
}

/// Serves newline-delimited JSON until `input` closes. Each message is
/// handled on its own thread so slow calls do not block the session;
/// replies are written whole, in completion order.
pub fn serve_stdio<H, R, W>(handler: &H, input: R, output: W) -> std::io::Result<()>
where
    H: MessageHandler + ?Sized,
    R: BufRead,
    W: Write + Send,
{
    let output = Mutex::new(output);
    std::thread::scope(|scope| {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let output = &output;
            scope.spawn(move || {
                let reply = match serde_json::from_str::<Value>(&line) {
                    Ok(v) => handler.handle(v),
                    Err(e) => Some(error_value(Value::Null, RpcError::new(jsonrpc::PARSE_ERROR, e.to_string()))),
                };
                if let Some(reply) = reply {
                    let mut out = output.lock().unwrap_or_else(|p| p.into_inner());
                    let _ = writeln!(out, "{reply}").and_then(|_| out.flush());
                }
            });
        }
        Ok(())
    })
}
