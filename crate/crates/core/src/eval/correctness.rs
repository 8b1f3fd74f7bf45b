//! Tool correctness and task-completion judges.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::dataset::ExpectedCall;
use crate::mcp::ToolCallRecord;

fn canonical_args(args: &Map<String, Value>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = args
        .iter()
        .filter(|(_, v)| !v.is_null())
        .map(|(k, v)| {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            (k.clone(), text)
        })
        .collect();
    out.sort();
    out
}

/// Matched expected calls over all expected calls. Each expected call can
/// be matched by one actual call with the same name and the same arguments
/// once values are compared as strings.
pub fn tool_correctness(transcript: &[ToolCallRecord], expected: &[ExpectedCall]) -> f64 {
    if expected.is_empty() {
        return 0.0;
    }
    let expected: Vec<(&str, Vec<(String, String)>)> =
        expected.iter().map(|c| (c.tool.as_str(), canonical_args(&c.args))).collect();
    let mut used = vec![false; expected.len()];
    let mut matched = 0usize;
    for call in transcript {
        let args = canonical_args(&call.arguments);
        if let Some(i) = (0..expected.len()).find(|&i| !used[i] && expected[i].0 == call.tool && expected[i].1 == args) {
            used[i] = true;
            matched += 1;
        }
    }
    matched as f64 / expected.len() as f64
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
}

/// What the judge sees. `reference` holds expected answer values for
/// judges that compare against them; remote judges only get task/outcome.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgeRequest {
    pub task: String,
    pub outcome: String,
    pub reference: Vec<String>,
}

pub trait Judge: Send + Sync {
    fn id(&self) -> &str;
    fn score(&self, request: &JudgeRequest) -> Result<f64, JudgeError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeJudgment {
    pub tool_correctness: f64,
    /// `None` when the judge could not score the episode.
    pub task_completion: Option<f64>,
    pub judged_by: String,
}

pub fn task_completion(request: &JudgeRequest, judge: &dyn Judge) -> Option<f64> {
    match judge.score(request) {
        Ok(s) => Some(s.clamp(0.0, 1.0)),
        Err(e) => {
            log::warn!("{}: {e}", judge.id());
            None
        }
    }
}

/// Fraction of reference values that appear verbatim in the outcome. A
/// cheap proxy; it does not measure semantic alignment.
#[derive(Debug, Default, Clone, Copy)]
pub struct ContainmentJudge;

impl Judge for ContainmentJudge {
    fn id(&self) -> &str {
        "containment"
    }

    fn score(&self, request: &JudgeRequest) -> Result<f64, JudgeError> {
        if request.outcome.trim().is_empty() {
            return Ok(0.0);
        }
        if request.reference.is_empty() {
            return Ok(1.0);
        }
        let found = request.reference.iter().filter(|v| request.outcome.contains(v.as_str())).count();
        Ok(found as f64 / request.reference.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct FixedJudge {
    pub id: String,
    pub score: f64,
}

impl Judge for FixedJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, _: &JudgeRequest) -> Result<f64, JudgeError> {
        Ok(self.score)
    }
}

/// POSTs `{"task", "outcome"}` and reads `{"score"}`.
pub struct RemoteJudge {
    id: String,
    endpoint: String,
    agent: ureq::Agent,
}

impl RemoteJudge {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let endpoint = endpoint.into();
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { id: format!("remote:{endpoint}"), endpoint, agent }
    }
}

#[derive(Deserialize)]
struct JudgeReply {
    score: f64,
}

impl Judge for RemoteJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&self, request: &JudgeRequest) -> Result<f64, JudgeError> {
        let body = serde_json::json!({ "task": request.task, "outcome": request.outcome });
        let reply: JudgeReply = self
            .agent
            .post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?
            .body_mut()
            .read_json()
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        if !reply.score.is_finite() {
            return Err(JudgeError::Unavailable(format!("score {} is not finite", reply.score)));
        }
        Ok(reply.score)
    }
}
