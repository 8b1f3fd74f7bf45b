use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::{json, Map, Value};

use super::*;
use crate::dataset::{Dataset, ExpectedCall, GenerateOptions};
use crate::embedding::{EmbeddingStrategy, TokenHashProvider};
use crate::eval::{ContainmentJudge, FixedJudge};
use crate::mcp::{RetrievalSettings, ToolDescriptor, ToolOutcome, ToolService};
use crate::workbench::Workbench;

fn bench() -> (Dataset, Workbench) {
    let ds = Dataset::standard(20, GenerateOptions { seed: 5, sq: 10, max_per_template: 1 }).unwrap();
    let embedder = EmbeddingStrategy::concat(Arc::new(TokenHashProvider::new(256)));
    let wb = Workbench::in_process(&ds, embedder, RetrievalSettings::default(), None);
    let report = wb.sync(false).unwrap();
    assert_eq!(report.created, 100);
    (ds, wb)
}

fn call(tool: &str, args: Value) -> ExpectedCall {
    ExpectedCall { tool: tool.into(), args: args.as_object().cloned().unwrap_or_default() }
}

#[test]
fn scripted_single_call_episode() {
    let (_, wb) = bench();
    let expected = vec![call("get_acme_revenue", json!({"year": 2024}))];
    let planner = ScriptedPlanner::new(expected.clone());
    let t = run_episode("What was Acme's revenue in 2024?", &planner, &wb.retrieval, &wb.gateway, Limits::default());
    assert_eq!(t.turns.len(), 3);
    assert_eq!(t.turns[0].decision, Decision::Retrieve(vec![RetrievalRequest { query: "acme revenue".into(), k: None, retriever: None }]));
    assert!(t.turns[0].newly_bound.contains(&"get_acme_revenue".to_owned()));
    assert_eq!(t.turns[1].tool_calls.len(), 1);
    assert_eq!(t.turns[1].tool_calls[0].result, Some(json!({"year": 2024, "revenue": crate::dataset::SyntheticMarket::new(5).revenue("acme", 2024).unwrap()})));
    assert!(t.final_answer().unwrap().contains("get_acme_revenue"));
    assert!(!t.truncated);
    t.check_tool_memory().unwrap();
    assert_eq!(crate::eval::tool_correctness(&t.tool_calls(), &expected), 1.0);
}

#[test]
fn immediate_answer() {
    let (_, wb) = bench();
    let t = run_episode("hi", &ImmediatePlanner("hello".into()), &wb.retrieval, &wb.gateway, Limits::default());
    assert_eq!(t.turns.len(), 1);
    assert!(t.tool_calls().is_empty());
    assert_eq!(t.final_answer(), Some("hello"));
}

#[test]
fn five_company_parallel_shape() {
    let (ds, wb) = bench();
    let expected: Vec<ExpectedCall> =
        ds.companies[..5].iter().map(|c| call(&format!("get_{}_net_income", c.slug()), json!({"year": 2024}))).collect();
    let t = run_episode("Net income of five companies in 2024?", &ScriptedPlanner::new(expected.clone()), &wb.retrieval, &wb.gateway, Limits::default());
    assert_eq!(t.turns.len(), 3);
    assert_eq!(t.turns[0].retrievals.len(), 5);
    for (r, e) in t.turns[0].retrievals.iter().zip(&expected) {
        assert_eq!(r.query, tool_words(&e.tool));
        assert!(r.tools.contains(&e.tool));
    }
    let calls = &t.turns[1].tool_calls;
    assert_eq!(calls.len(), 5);
    for (c, e) in calls.iter().zip(&expected) {
        assert_eq!(c.tool, e.tool);
    }
    assert!(t.turns[2].final_answer.is_some());
}

struct Slow;

impl ToolService for Slow {
    fn server_name(&self) -> &str {
        "slow"
    }
    fn tools(&self) -> Vec<ToolDescriptor> {
        vec![ToolDescriptor { name: "wait".into(), description: "Waits".into(), input_schema: json!({"type": "object", "properties": {"n": {"type": "integer"}}}) }]
    }
    fn call(&self, _: &str, args: &Map<String, Value>) -> ToolOutcome {
        let n = args["n"].as_u64().unwrap();
        std::thread::sleep(Duration::from_millis(120 - 20 * n));
        ToolOutcome::Ok(json!(n))
    }
}

struct CallWaits(usize);

impl Planner for CallWaits {
    fn id(&self) -> &str {
        "waits"
    }
    fn next(&self, state: &PlannerState<'_>) -> Result<Decision, PlannerError> {
        Ok(match state.turns.len() {
            0 => Decision::Retrieve(vec![RetrievalRequest { query: "waits".into(), k: Some(1), retriever: None }]),
            1 => Decision::CallTools(
                (0..self.0)
                    .map(|n| PlannedCall { tool: "wait".into(), arguments: json!({"n": n}).as_object().unwrap().clone() })
                    .chain([PlannedCall { tool: "never_bound".into(), arguments: Map::new() }])
                    .collect(),
            ),
            _ => Decision::Answer(summarize_calls(state)),
        })
    }
}

fn slow_bench() -> Workbench {
    let mut gateway = Gateway::new();
    let handler: Arc<dyn crate::mcp::MessageHandler> = Arc::new(crate::mcp::McpServer::new(Slow));
    gateway.register(McpClient::new("slow", Box::new(crate::mcp::InProcessTransport::new("slow", handler)))).unwrap();
    let embedder = EmbeddingStrategy::concat(Arc::new(TokenHashProvider::new(64)));
    let owners = [("wait".to_owned(), "slow".to_owned())].into_iter().collect();
    let wb = Workbench::with_gateway(gateway, embedder, RetrievalSettings::default(), None, owners);
    wb.sync(false).unwrap();
    wb
}

#[test]
fn batches_run_in_parallel_and_keep_order() {
    let wb = slow_bench();
    let started = Instant::now();
    let t = run_episode("q", &CallWaits(5), &wb.retrieval, &wb.gateway, Limits::default());
    assert!(started.elapsed() < Duration::from_millis(400), "{:?}", started.elapsed());
    let results: Vec<Value> = t.turns[1].tool_calls.iter().map(|c| c.result.clone().unwrap()).collect();
    assert_eq!(results, (0..5).map(|n| json!(n)).collect::<Vec<_>>());
    assert_eq!(t.turns[1].rejected.len(), 1);
    t.check_tool_memory().unwrap();

    let started = Instant::now();
    let serial = run_episode("q", &CallWaits(3), &wb.retrieval, &wb.gateway, Limits { max_parallel: 1, ..Limits::default() });
    assert!(started.elapsed() >= Duration::from_millis(120 + 100 + 80));
    assert_eq!(serial.turns[1].tool_calls.len(), 3);
}

struct Loop;

impl Planner for Loop {
    fn id(&self) -> &str {
        "loop"
    }
    fn next(&self, _: &PlannerState<'_>) -> Result<Decision, PlannerError> {
        Ok(Decision::Retrieve(vec![RetrievalRequest { query: "anything".into(), k: None, retriever: None }]))
    }
}

struct Broken;

impl Planner for Broken {
    fn id(&self) -> &str {
        "broken"
    }
    fn next(&self, state: &PlannerState<'_>) -> Result<Decision, PlannerError> {
        if state.turns.is_empty() {
            Ok(Decision::Retrieve(vec![RetrievalRequest { query: "acme".into(), k: None, retriever: None }]))
        } else {
            Err(PlannerError::Unavailable("model offline".into()))
        }
    }
}

#[test]
fn truncation_and_planner_errors() {
    let (_, wb) = bench();
    let t = run_episode("q", &Loop, &wb.retrieval, &wb.gateway, Limits { max_turns: 3, max_parallel: 4 });
    assert_eq!(t.turns.len(), 3);
    assert!(t.truncated);
    assert!(t.final_answer().is_none());

    let t = run_episode("q", &Broken, &wb.retrieval, &wb.gateway, Limits::default());
    assert_eq!(t.turns.len(), 1);
    assert!(!t.truncated);
    assert!(t.error.unwrap().contains("model offline"));
}

#[test]
fn tool_errors_flow_back() {
    let (_, wb) = bench();
    let planner = ScriptedPlanner::new(vec![call("get_acme_revenue", json!({"year": 1990}))]);
    let t = run_episode("Acme 1990?", &planner, &wb.retrieval, &wb.gateway, Limits::default());
    assert!(t.turns[1].tool_calls[0].error.is_some());
    assert!(t.final_answer().unwrap().contains("failed"));
}

#[test]
fn suite_scores_and_determinism() {
    let (ds, wb) = bench();
    let instances: Vec<_> = ds.instances.iter().take(50).cloned().collect();
    let tool_server = |t: &str| wb.tool_server(t);
    let runner = SuiteRunner { retrieval: &wb.retrieval, gateway: &wb.gateway, judge: &ContainmentJudge, limits: Limits::default(), tool_server: &tool_server };
    let a = runner.run(&instances, |i| Box::new(ScriptedPlanner::new(i.expected_calls.clone())));
    let b = runner.run(&instances, |i| Box::new(ScriptedPlanner::new(i.expected_calls.clone())));
    assert_eq!(a.episodes.len(), 50);
    assert!(a.failures.is_empty(), "{:?}", a.failures);
    assert_eq!(a.mean_tool_correctness, 1.0);
    assert_eq!(a.mean_task_completion, Some(1.0));
    let mean = a.episodes.iter().map(|e| e.judgment.tool_correctness).sum::<f64>() / 50.0;
    assert_eq!(mean, a.mean_tool_correctness);
    for (x, y) in a.episodes.iter().zip(&b.episodes) {
        x.transcript.check_tool_memory().unwrap();
        assert_eq!(x.transcript.without_timings(), y.transcript.without_timings());
    }

    let silent = runner.run(&instances[..5], |_| Box::new(ImmediatePlanner("no idea".into())));
    assert_eq!(silent.mean_tool_correctness, 0.0);

    let fixed = FixedJudge { id: "stub".into(), score: 0.73 };
    let runner = SuiteRunner { judge: &fixed, ..runner };
    let r = runner.run(&instances[..2], |i| Box::new(ScriptedPlanner::new(i.expected_calls.clone())));
    assert_eq!(r.mean_task_completion, Some(0.73));
    assert_eq!(r.episodes[0].judgment.judged_by, "stub");
}

#[test]
fn remote_planner_round_trip() {
    let (_, wb) = bench();
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", server.server_addr().to_ip().unwrap());
    let replies = [
        json!({"choices": [{"message": {"tool_calls": [{"id": "a", "type": "function", "function": {"name": "get_mcp_servers", "arguments": "{\"query\": \"acme revenue\"}"}}]}}]}),
        json!({"choices": [{"message": {"tool_calls": [{"id": "b", "type": "function", "function": {"name": "get_acme_revenue", "arguments": "{\"year\": 2024}"}}]}}]}),
        json!({"choices": [{"message": {"content": "Acme made money."}}]}),
    ];
    let worker = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for reply in replies {
            let mut req = server.recv().unwrap();
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            seen.push(serde_json::from_str::<Value>(&body).unwrap());
            req.respond(tiny_http::Response::from_string(reply.to_string())).unwrap();
        }
        seen
    });
    let planner = RemotePlanner::new(url, "stub-model", None, Duration::from_secs(5));
    let t = run_episode("Acme revenue 2024?", &planner, &wb.retrieval, &wb.gateway, Limits::default());
    let seen = worker.join().unwrap();
    assert_eq!(t.turns.len(), 3, "{t:?}");
    assert_eq!(t.turns[1].tool_calls[0].tool, "get_acme_revenue");
    assert_eq!(t.final_answer(), Some("Acme made money."));
    assert_eq!(seen[0]["messages"][0]["content"], DEFAULT_SYSTEM_PROMPT);
    assert_eq!(seen[0]["tools"].as_array().unwrap().len(), 1);
    assert!(seen[1]["tools"].as_array().unwrap().len() > 1);
    assert_eq!(seen[2]["messages"].as_array().unwrap().len(), 6);
    assert_eq!(seen[2]["messages"][5]["role"], "tool");
}
