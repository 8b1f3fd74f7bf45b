//! HTTP transport, server side: one JSON-RPC message per POST body.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;
use tiny_http::{Header, Method, Response, Server};

use super::server::MessageHandler;

pub struct HttpServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl HttpServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Full URL for a mounted path, e.g. `url("/servers/acme")`.
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Blocks until the workers exit (they only exit on shutdown).
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(self) {
        drop(self);
    }
}

impl Drop for HttpServerHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// Serves each route's handler at its path. `workers` threads pull requests
/// from a shared queue, so sessions are handled concurrently.
pub fn serve_http(
    addr: &str,
    routes: Vec<(String, Arc<dyn MessageHandler>)>,
    workers: usize,
) -> io::Result<HttpServerHandle> {
    let server = Server::http(addr).map_err(|e| io::Error::other(e.to_string()))?;
    let bound = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| io::Error::other("HTTP server is not bound to an IP address"))?;
    let server = Arc::new(server);
    let routes: Arc<HashMap<String, Arc<dyn MessageHandler>>> = Arc::new(routes.into_iter().collect());
    let stop = Arc::new(AtomicBool::new(false));
    let workers = (0..workers.max(1))
        .map(|_| {
            let (server, routes, stop) = (Arc::clone(&server), Arc::clone(&routes), Arc::clone(&stop));
            std::thread::spawn(move || {
                while !stop.load(Ordering::SeqCst) {
                    match server.recv() {
                        Ok(req) => respond(req, &routes),
                        Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                        Err(e) => log::warn!("http accept failed: {e}"),
                    }
                }
            })
        })
        .collect();
    Ok(HttpServerHandle { addr: bound, server, stop, workers })
}

fn json_header() -> Header {
    Header::from_bytes("Content-Type", "application/json").expect("static header")
}

fn respond(mut req: tiny_http::Request, routes: &HashMap<String, Arc<dyn MessageHandler>>) {
    let path = req.url().split('?').next().unwrap_or("").trim_end_matches('/').to_owned();
    let path = if path.is_empty() { "/".to_owned() } else { path };
    let Some(handler) = routes.get(&path) else {
        let _ = req.respond(Response::from_string("not found").with_status_code(404));
        return;
    };
    if *req.method() != Method::Post {
        let _ = req.respond(Response::from_string("POST a JSON-RPC message").with_status_code(405));
        return;
    }
    let mut body = String::new();
    if let Err(e) = req.as_reader().read_to_string(&mut body) {
        let _ = req.respond(Response::from_string(e.to_string()).with_status_code(400));
        return;
    }
    let reply = match serde_json::from_str::<Value>(&body) {
        Ok(v) => handler.handle(v),
        Err(e) => Some(serde_json::json!({
            "jsonrpc": "2.0",
            "id": null,
            "error": { "code": super::jsonrpc::PARSE_ERROR, "message": e.to_string() },
        })),
    };
    let result = match reply {
        Some(v) => req.respond(Response::from_string(v.to_string()).with_header(json_header())),
        None => req.respond(Response::empty(202)),
    };
    if let Err(e) = result {
        log::warn!("http reply failed: {e}");
    }
}
