//! Client-side transports.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::server::MessageHandler;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    StdioSubprocess,
    Http,
    InProcess,
}

/// Moves one JSON-RPC message and returns the reply, if the message expects one.
pub trait Transport: Send + Sync {
    fn kind(&self) -> TransportKind;
    fn address(&self) -> String;
    fn send(&self, message: &Value) -> Result<Option<Value>, TransportError>;
}

fn expects_reply(message: &Value) -> bool {
    message.get("id").is_some_and(|id| !id.is_null())
}

/// Calls a handler directly, for servers living in the same process.
pub struct InProcessTransport {
    name: String,
    handler: Arc<dyn MessageHandler>,
}

impl InProcessTransport {
    pub fn new(name: impl Into<String>, handler: Arc<dyn MessageHandler>) -> Self {
        Self { name: name.into(), handler }
    }
}

impl Transport for InProcessTransport {
    fn kind(&self) -> TransportKind {
        TransportKind::InProcess
    }

    fn address(&self) -> String {
        format!("in-process:{}", self.name)
    }

    fn send(&self, message: &Value) -> Result<Option<Value>, TransportError> {
        Ok(self.handler.handle(message.clone()))
    }
}

pub struct HttpTransport {
    url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { url: url.into(), agent }
    }
}

impl Transport for HttpTransport {
    fn kind(&self) -> TransportKind {
        TransportKind::Http
    }

    fn address(&self) -> String {
        self.url.clone()
    }

    fn send(&self, message: &Value) -> Result<Option<Value>, TransportError> {
        let err = |e: ureq::Error| TransportError(format!("{}: {e}", self.url));
        // tiny_http parks one pool thread on every open connection and can
        // queue a fresh connection behind idle keep-alive ones indefinitely,
        // so each message gets its own connection.
        let mut resp = self.agent.post(&self.url).header("Connection", "close").send_json(message).map_err(err)?;
        let body = resp.body_mut().read_to_string().map_err(err)?;
        if body.trim().is_empty() {
            return if expects_reply(message) {
                Err(TransportError(format!("{}: empty reply to a request", self.url)))
            } else {
                Ok(None)
            };
        }
        serde_json::from_str(&body)
            .map(Some)
            .map_err(|e| TransportError(format!("{}: reply is not JSON: {e}", self.url)))
    }
}

type Pending = Arc<Mutex<Option<HashMap<String, Sender<Value>>>>>;

/// A subprocess speaking newline-delimited JSON on stdin/stdout. A reader
/// thread routes replies to waiting callers by id, so calls may overlap.
pub struct StdioTransport {
    command: String,
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    pending: Pending,
    timeout: Duration,
}

impl StdioTransport {
    pub fn spawn(program: &str, args: &[String], timeout: Duration) -> Result<Self, TransportError> {
        let command = std::iter::once(program.to_owned()).chain(args.iter().cloned()).collect::<Vec<_>>().join(" ");
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| TransportError(format!("spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let pending: Pending = Arc::new(Mutex::new(Some(HashMap::new())));
        let routes = Arc::clone(&pending);
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                let Ok(msg) = serde_json::from_str::<Value>(&line) else {
                    log::warn!("stdio server wrote a non-JSON line: {line}");
                    continue;
                };
                let Some(id) = msg.get("id").filter(|id| !id.is_null()) else { continue };
                let key = id.to_string();
                let waiter = routes.lock().unwrap_or_else(|p| p.into_inner()).as_mut().and_then(|m| m.remove(&key));
                if let Some(tx) = waiter {
                    let _ = tx.send(msg);
                }
            }
            // Closing the map wakes every waiter with a disconnect.
            routes.lock().unwrap_or_else(|p| p.into_inner()).take();
        });
        Ok(Self { command, child: Mutex::new(child), stdin: Mutex::new(stdin), pending, timeout })
    }
}

impl Transport for StdioTransport {
    fn kind(&self) -> TransportKind {
        TransportKind::StdioSubprocess
    }

    fn address(&self) -> String {
        self.command.clone()
    }

    fn send(&self, message: &Value) -> Result<Option<Value>, TransportError> {
        let closed = || TransportError(format!("`{}` closed its stdout", self.command));
        let waiter = if expects_reply(message) {
            let (tx, rx) = mpsc::channel();
            let key = message["id"].to_string();
            let mut pending = self.pending.lock().unwrap_or_else(|p| p.into_inner());
            pending.as_mut().ok_or_else(closed)?.insert(key.clone(), tx);
            Some((key, rx))
        } else {
            None
        };
        {
            let mut stdin = self.stdin.lock().unwrap_or_else(|p| p.into_inner());
            writeln!(stdin, "{message}")
                .and_then(|_| stdin.flush())
                .map_err(|e| TransportError(format!("write to `{}`: {e}", self.command)))?;
        }
        let Some((key, rx)) = waiter else { return Ok(None) };
        match rx.recv_timeout(self.timeout) {
            Ok(reply) => Ok(Some(reply)),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                if let Some(m) = self.pending.lock().unwrap_or_else(|p| p.into_inner()).as_mut() {
                    m.remove(&key);
                }
                Err(TransportError(format!("`{}` did not answer within {:?}", self.command, self.timeout)))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => Err(closed()),
        }
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        let child = self.child.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = child.kill();
        let _ = child.wait();
    }
}
