//! Planners decide the next step of an episode from the conversation so far.

use std::time::Duration;

use serde_json::{json, Map, Value};

use super::{BoundTool, Decision, PlannedCall, PlannerError, PlannerState, RetrievalRequest};
use crate::dataset::ExpectedCall;
use crate::mcp::RETRIEVAL_TOOL;

pub const DEFAULT_SYSTEM_PROMPT: &str = "You are an intelligent financial assistant. You have access to a large knowledge base of tools.\n\
The only way to use the large knowledge base of tools is to use the 'get_mcp_servers' tool to search relevant ones.\n\
Query the 'get_mcp_servers' knowledge base by passing in a query for a tool you want to search for.\n\
IF YOU NEED MULTIPLE TOOLS, USE PARALLEL TOOL CALLING, EACH TOOL CALL TO SEARCH FOR SPECIFIC TOOLS.";

pub trait Planner: Send + Sync {
    fn id(&self) -> &str;
    fn next(&self, state: &PlannerState<'_>) -> Result<Decision, PlannerError>;
}

/// Deterministic planner that knows the expected calls. It retrieves each
/// needed tool by its name in words, re-queries with a wider `k` while some
/// are still unbound, calls everything it could bind in one batch, then
/// answers with the raw results.
#[derive(Debug, Clone)]
pub struct ScriptedPlanner {
    expected: Vec<ExpectedCall>,
    max_requery: usize,
    requery_k: usize,
}

impl ScriptedPlanner {
    pub fn new(expected: Vec<ExpectedCall>) -> Self {
        Self { expected, max_requery: 1, requery_k: 20 }
    }

    pub fn with_requery(mut self, max_requery: usize, requery_k: usize) -> Self {
        self.max_requery = max_requery;
        self.requery_k = requery_k;
        self
    }

    fn needed(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.expected {
            if !out.contains(&c.tool.as_str()) {
                out.push(&c.tool);
            }
        }
        out
    }
}

/// `get_acme_revenue` -> `acme revenue`.
pub fn tool_words(tool: &str) -> String {
    tool.strip_prefix("get_").unwrap_or(tool).replace('_', " ")
}

/// One line per call: `tool(args) = result` or `tool(args) failed: error`.
pub fn summarize_calls(state: &PlannerState<'_>) -> String {
    let lines: Vec<String> = state
        .turns
        .iter()
        .flat_map(|t| &t.tool_calls)
        .map(|c| {
            let args = Value::Object(c.arguments.clone());
            match (&c.result, &c.error) {
                (Some(r), _) => format!("{}({args}) = {r}", c.tool),
                (None, Some(e)) => format!("{}({args}) failed: {e}", c.tool),
                (None, None) => format!("{}({args}) returned nothing", c.tool),
            }
        })
        .collect();
    if lines.is_empty() {
        format!("No tool results were needed for: {}", state.query)
    } else {
        lines.join("\n")
    }
}

impl Planner for ScriptedPlanner {
    fn id(&self) -> &str {
        "scripted"
    }

    fn next(&self, state: &PlannerState<'_>) -> Result<Decision, PlannerError> {
        let called = state.turns.iter().any(|t| matches!(t.decision, Decision::CallTools(_)));
        let retrievals = state.turns.iter().filter(|t| matches!(t.decision, Decision::Retrieve(_))).count();
        if !called {
            let unbound: Vec<&str> = self.needed().into_iter().filter(|t| !state.bound.contains_key(*t)).collect();
            if !unbound.is_empty() && retrievals <= self.max_requery {
                let k = (retrievals > 0).then_some(self.requery_k);
                return Ok(Decision::Retrieve(
                    unbound.iter().map(|t| RetrievalRequest { query: tool_words(t), k, retriever: None }).collect(),
                ));
            }
            let calls: Vec<PlannedCall> = self
                .expected
                .iter()
                .filter(|c| state.bound.contains_key(&c.tool))
                .map(|c| PlannedCall { tool: c.tool.clone(), arguments: c.args.clone() })
                .collect();
            if !calls.is_empty() {
                return Ok(Decision::CallTools(calls));
            }
        }
        Ok(Decision::Answer(summarize_calls(state)))
    }
}

/// Answers at once without touching any tool.
#[derive(Debug, Clone)]
pub struct ImmediatePlanner(pub String);

impl Planner for ImmediatePlanner {
    fn id(&self) -> &str {
        "immediate"
    }

    fn next(&self, _: &PlannerState<'_>) -> Result<Decision, PlannerError> {
        Ok(Decision::Answer(self.0.clone()))
    }
}

/// Adapter for a chat-completions endpoint with function calling.
pub struct RemotePlanner {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    system_prompt: String,
    agent: ureq::Agent,
}

impl RemotePlanner {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            system_prompt: DEFAULT_SYSTEM_PROMPT.into(),
            agent: ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into(),
        }
    }

    pub fn with_system_prompt(mut self, prompt: impl Into<String>) -> Self {
        self.system_prompt = prompt.into();
        self
    }

    fn function(name: &str, description: &str, parameters: &Value) -> Value {
        json!({ "type": "function", "function": { "name": name, "description": description, "parameters": parameters } })
    }

    /// Messages and function specs for the current state.
    pub fn request_body(&self, state: &PlannerState<'_>) -> Value {
        let mut messages = vec![
            json!({ "role": "system", "content": self.system_prompt }),
            json!({ "role": "user", "content": state.query }),
        ];
        for (ti, turn) in state.turns.iter().enumerate() {
            let (calls, outputs): (Vec<Value>, Vec<String>) = match &turn.decision {
                Decision::Retrieve(reqs) => reqs
                    .iter()
                    .zip(&turn.retrievals)
                    .map(|(r, out)| {
                        let mut args = Map::new();
                        args.insert("query".into(), json!(r.query));
                        if let Some(k) = r.k {
                            args.insert("k".into(), json!(k));
                        }
                        let content = match &out.error {
                            Some(e) => format!("error: {e}"),
                            None => json!({ "tools": out.tools }).to_string(),
                        };
                        ((RETRIEVAL_TOOL.to_owned(), Value::Object(args)), content)
                    })
                    .map(|((name, args), content)| (json!({ "name": name, "arguments": args.to_string() }), content))
                    .unzip(),
                Decision::CallTools(_) => turn
                    .tool_calls
                    .iter()
                    .map(|c| {
                        let content = match (&c.result, &c.error) {
                            (Some(r), _) => r.to_string(),
                            (_, Some(e)) => format!("error: {e}"),
                            _ => String::new(),
                        };
                        (json!({ "name": c.tool, "arguments": Value::Object(c.arguments.clone()).to_string() }), content)
                    })
                    .unzip(),
                Decision::Answer(text) => {
                    messages.push(json!({ "role": "assistant", "content": text }));
                    continue;
                }
            };
            let ids: Vec<String> = (0..calls.len()).map(|i| format!("call_{ti}_{i}")).collect();
            let tool_calls: Vec<Value> = calls
                .into_iter()
                .zip(&ids)
                .map(|(f, id)| json!({ "id": id, "type": "function", "function": f }))
                .collect();
            messages.push(json!({ "role": "assistant", "content": null, "tool_calls": tool_calls }));
            for (id, content) in ids.iter().zip(outputs) {
                messages.push(json!({ "role": "tool", "tool_call_id": id, "content": content }));
            }
        }
        let mut tools = vec![Self::function(
            RETRIEVAL_TOOL,
            "Search the knowledge base of tools. Pass a query for one tool you need.",
            &json!({ "type": "object", "properties": { "query": { "type": "string" } }, "required": ["query"] }),
        )];
        tools.extend(state.bound.values().map(|t: &BoundTool| Self::function(&t.name, &t.description, &t.input_schema)));
        json!({ "model": self.model, "messages": messages, "tools": tools })
    }

    fn parse(reply: &Value) -> Result<Decision, PlannerError> {
        let bad = |why: &str| PlannerError::InvalidResponse(why.to_owned());
        let message = reply.pointer("/choices/0/message").ok_or_else(|| bad("missing choices[0].message"))?;
        let calls = message.get("tool_calls").and_then(Value::as_array).filter(|c| !c.is_empty());
        let Some(calls) = calls else {
            let text = message.get("content").and_then(Value::as_str).ok_or_else(|| bad("message has neither tool calls nor content"))?;
            return Ok(Decision::Answer(text.to_owned()));
        };
        let mut retrievals = Vec::new();
        let mut tool_calls = Vec::new();
        for call in calls {
            let name = call.pointer("/function/name").and_then(Value::as_str).ok_or_else(|| bad("tool call without a name"))?;
            let raw = call.pointer("/function/arguments").and_then(Value::as_str).unwrap_or("{}");
            let arguments: Map<String, Value> = serde_json::from_str(raw).map_err(|e| bad(&format!("arguments for {name}: {e}")))?;
            if name == RETRIEVAL_TOOL {
                let query = arguments.get("query").and_then(Value::as_str).unwrap_or_default().to_owned();
                let k = arguments.get("k").and_then(Value::as_u64).map(|k| k as usize);
                let retriever = arguments.get("retriever").and_then(Value::as_str).map(str::to_owned);
                retrievals.push(RetrievalRequest { query, k, retriever });
            } else {
                tool_calls.push(PlannedCall { tool: name.to_owned(), arguments });
            }
        }
        Ok(if retrievals.is_empty() { Decision::CallTools(tool_calls) } else { Decision::Retrieve(retrievals) })
    }
}

impl Planner for RemotePlanner {
    fn id(&self) -> &str {
        &self.model
    }

    fn next(&self, state: &PlannerState<'_>) -> Result<Decision, PlannerError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let reply: Value = req
            .send_json(self.request_body(state))
            .map_err(|e| PlannerError::Unavailable(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| PlannerError::Unavailable(e.to_string()))?;
        Self::parse(&reply)
    }
}
