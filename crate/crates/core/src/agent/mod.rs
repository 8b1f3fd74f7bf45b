//! The invocation loop: retrieve tools, bind them, call them, answer.

mod planner;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

pub use planner::{summarize_calls, tool_words, ImmediatePlanner, Planner, RemotePlanner, ScriptedPlanner, DEFAULT_SYSTEM_PROMPT};

use crate::dataset::QueryInstance;
use crate::eval::{task_completion, tool_correctness, EpisodeJudgment, Judge, JudgeRequest};
use crate::mcp::{Gateway, McpClient, ToolCallRecord, RETRIEVAL_TOOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("planner unavailable: {0}")]
    Unavailable(String),
    #[error("planner returned an invalid response: {0}")]
    InvalidResponse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    pub max_turns: usize,
    pub max_parallel: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_turns: 8, max_parallel: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRequest {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retriever: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedCall {
    pub tool: String,
    pub arguments: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "batch", rename_all = "snake_case")]
pub enum Decision {
    Retrieve(Vec<RetrievalRequest>),
    CallTools(Vec<PlannedCall>),
    Answer(String),
}

/// A tool spec returned by retrieval and now callable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTool {
    pub name: String,
    pub description: String,
    #[serde(rename = "inputSchema")]
    pub input_schema: Value,
    pub server: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRecord {
    pub query: String,
    /// Names of the returned tools, best first.
    pub tools: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retrievals: Vec<RetrievalRecord>,
    /// Tools bound for the first time in this turn.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub newly_bound: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCallRecord>,
    /// Calls to tools that were never bound; they are not executed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected: Vec<PlannedCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_answer: Option<String>,
}

impl Turn {
    fn new(decision: Decision) -> Self {
        Self { decision, retrievals: vec![], newly_bound: vec![], tool_calls: vec![], rejected: vec![], final_answer: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTranscript {
    pub query: String,
    pub planner: String,
    pub turns: Vec<Turn>,
    pub bound_tools: Vec<String>,
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeTranscript {
    pub fn final_answer(&self) -> Option<&str> {
        self.turns.last().and_then(|t| t.final_answer.as_deref())
    }

    pub fn tool_calls(&self) -> Vec<ToolCallRecord> {
        self.turns.iter().flat_map(|t| t.tool_calls.iter().cloned()).collect()
    }

    /// Copy with every latency zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut copy = self.clone();
        for t in &mut copy.turns {
            t.retrievals.iter_mut().for_each(|r| r.latency_ms = 0);
            t.tool_calls.iter_mut().for_each(|c| c.latency_ms = 0);
        }
        copy
    }

    /// Every executed call names a tool bound in the same or an earlier turn.
    pub fn check_tool_memory(&self) -> Result<(), String> {
        let mut bound: Vec<&str> = Vec::new();
        for (i, t) in self.turns.iter().enumerate() {
            bound.extend(t.newly_bound.iter().map(String::as_str));
            if let Some(c) = t.tool_calls.iter().find(|c| !bound.contains(&c.tool.as_str())) {
                return Err(format!("turn {i} calls unbound tool `{}`", c.tool));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).map_err(std::io::Error::other)? + "\n")
    }
}

/// What the planner sees when choosing its next step.
pub struct PlannerState<'a> {
    pub query: &'a str,
    pub turns: &'a [Turn],
    pub bound: &'a BTreeMap<String, BoundTool>,
}

/// Runs `jobs` with at most `max_parallel` in flight, keeping input order.
fn run_batch<T: Sync, R: Send>(jobs: &[T], max_parallel: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let mut out = Vec::with_capacity(jobs.len());
    for chunk in jobs.chunks(max_parallel.max(1)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|job| s.spawn(|| f(job))).collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("batch worker panicked")));
        });
    }
    out
}

fn retrieve(retrieval: &McpClient, request: &RetrievalRequest) -> (RetrievalRecord, Vec<BoundTool>) {
    let mut args = Map::new();
    args.insert("query".into(), json!(request.query));
    if let Some(k) = request.k {
        args.insert("k".into(), json!(k));
    }
    if let Some(r) = &request.retriever {
        args.insert("retriever".into(), json!(r));
    }
    let outcome = retrieval
        .call_tool(RETRIEVAL_TOOL, args)
        .map_err(|e| e.to_string())
        .and_then(|rec| match (rec.result, rec.error) {
            (_, Some(e)) => Err(e),
            (Some(v), None) => {
                let tools: Vec<BoundTool> = serde_json::from_value(v.get("tools").cloned().unwrap_or(Value::Null))
                    .map_err(|e| format!("malformed retrieval result: {e}"))?;
                Ok((tools, rec.latency_ms))
            }
            (None, None) => Err("empty retrieval result".into()),
        });
    match outcome {
        Ok((tools, latency_ms)) => (
            RetrievalRecord { query: request.query.clone(), tools: tools.iter().map(|t| t.name.clone()).collect(), error: None, latency_ms },
            tools,
        ),
        Err(e) => (RetrievalRecord { query: request.query.clone(), tools: vec![], error: Some(e), latency_ms: 0 }, vec![]),
    }
}

pub fn run_episode(
    query: &str,
    planner: &dyn Planner,
    retrieval: &McpClient,
    gateway: &Gateway,
    limits: Limits,
) -> EpisodeTranscript {
    let mut turns: Vec<Turn> = Vec::new();
    let mut bound: BTreeMap<String, BoundTool> = BTreeMap::new();
    let mut error = None;
    let mut answered = false;
    while turns.len() < limits.max_turns {
        let decision = match planner.next(&PlannerState { query, turns: &turns, bound: &bound }) {
            Ok(d) => d,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let mut turn = Turn::new(decision.clone());
        match decision {
            Decision::Retrieve(requests) => {
                for (record, tools) in run_batch(&requests, limits.max_parallel, |r| retrieve(retrieval, r)) {
                    for tool in tools {
                        if !bound.contains_key(&tool.name) {
                            turn.newly_bound.push(tool.name.clone());
                            bound.insert(tool.name.clone(), tool);
                        }
                    }
                    turn.retrievals.push(record);
                }
            }
            Decision::CallTools(calls) => {
                let (ok, rejected): (Vec<PlannedCall>, Vec<PlannedCall>) =
                    calls.into_iter().partition(|c| bound.contains_key(&c.tool));
                turn.rejected = rejected;
                turn.tool_calls = run_batch(&ok, limits.max_parallel, |c| {
                    gateway.call(&bound[&c.tool].server, &c.tool, c.arguments.clone())
                });
            }
            Decision::Answer(text) => {
                turn.final_answer = Some(text);
                answered = true;
            }
        }
        turns.push(turn);
        if answered {
            break;
        }
    }
    EpisodeTranscript {
        query: query.to_owned(),
        planner: planner.id().to_owned(),
        turns,
        bound_tools: bound.into_keys().collect(),
        truncated: !answered && error.is_none(),
        error,
    }
}

/// Scalar leaves of a tool result, as the strings an answer would show.
fn scalar_values(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => m.values().for_each(|x| scalar_values(x, out)),
        Value::Array(a) => a.iter().for_each(|x| scalar_values(x, out)),
        Value::Null => {}
        Value::String(s) => out.push(s.clone()),
        other => out.push(other.to_string()),
    }
}

/// The values a correct answer should mention: results of the expected
/// calls, fetched through the gateway.
pub fn reference_values(instance: &QueryInstance, gateway: &Gateway, servers: &dyn Fn(&str) -> Option<String>) -> Vec<String> {
    let mut out = Vec::new();
    for call in &instance.expected_calls {
        let Some(server) = servers(&call.tool) else { continue };
        if let Some(result) = gateway.call(&server, &call.tool, call.args.clone()).result {
            scalar_values(&result, &mut out);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub instance_id: String,
    pub transcript: EpisodeTranscript,
    pub judgment: EpisodeJudgment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub planner: String,
    pub episodes: Vec<EpisodeOutcome>,
    pub mean_tool_correctness: f64,
    /// Mean over the episodes the judge scored; `None` if it scored none.
    pub mean_task_completion: Option<f64>,
    pub failures: Vec<(String, String)>,
}

pub struct SuiteRunner<'a> {
    pub retrieval: &'a McpClient,
    pub gateway: &'a Gateway,
    pub judge: &'a dyn Judge,
    pub limits: Limits,
    /// Maps a tool name to the server that owns it, for reference answers.
    pub tool_server: &'a (dyn Fn(&str) -> Option<String> + Sync),
}

impl SuiteRunner<'_> {
    /// Runs every instance (in parallel) with a planner built for it.
    pub fn run<F>(&self, instances: &[QueryInstance], make_planner: F) -> SuiteReport
    where
        F: Fn(&QueryInstance) -> Box<dyn Planner> + Sync,
    {
        let episodes: Vec<EpisodeOutcome> = instances
            .par_iter()
            .map(|inst| {
                let planner = make_planner(inst);
                let transcript = run_episode(&inst.query_text, planner.as_ref(), self.retrieval, self.gateway, self.limits);
                let request = JudgeRequest {
                    task: inst.query_text.clone(),
                    outcome: transcript.final_answer().unwrap_or_default().to_owned(),
                    reference: reference_values(inst, self.gateway, self.tool_server),
                };
                let judgment = EpisodeJudgment {
                    tool_correctness: tool_correctness(&transcript.tool_calls(), &inst.expected_calls),
                    task_completion: task_completion(&request, self.judge),
                    judged_by: self.judge.id().to_owned(),
                };
                EpisodeOutcome { instance_id: inst.id.clone(), transcript, judgment }
            })
            .collect();
        let failures = episodes
            .iter()
            .filter_map(|e| {
                let why = e.transcript.error.clone().or_else(|| e.transcript.truncated.then(|| "hit max_turns".to_owned()))?;
                Some((e.instance_id.clone(), why))
            })
            .collect();
        let n = episodes.len().max(1) as f64;
        let completions: Vec<f64> = episodes.iter().filter_map(|e| e.judgment.task_completion).collect();
        SuiteReport {
            planner: episodes.first().map(|e| e.transcript.planner.clone()).unwrap_or_default(),
            mean_tool_correctness: episodes.iter().map(|e| e.judgment.tool_correctness).sum::<f64>() / n,
            mean_task_completion: (!completions.is_empty())
                .then(|| completions.iter().sum::<f64>() / completions.len() as f64),
            episodes,
            failures,
        }
    }
}
