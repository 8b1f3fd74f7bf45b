use std::sync::Arc;

use proptest::prelude::*;
use serde_json::{json, Value};

use super::*;
use crate::dataset::{bundled_question_bank, bundled_roster, generate_fleet, ExpectedCall, QueryInstance};
use crate::embedding::{ComponentWeights, EmbeddingStrategy, StrategyKind, TokenHashProvider};
use crate::index::{IdentityReranker, Retriever};
use crate::mcp::ToolCallRecord;
use crate::retrieval::SearchOptions;

fn judgment(golden: &[&str]) -> RelevanceJudgment {
    RelevanceJudgment::new("q", golden.iter().copied()).unwrap()
}

#[test]
fn worked_example() {
    let j = judgment(&["A", "B"]);
    let r = ["A", "X", "B"];
    assert!((ndcg_at_k(&r, &j, 3) - 0.91972).abs() < 1e-5);
    assert_eq!(ndcg_at_k(&r, &j, 3), 0.9197207891481876);
    assert_eq!(recall_at_k(&r, &j, 3), 1.0);
    assert!((map_at_k(&r, &j, 3) - 0.83333).abs() < 1e-5);
}

#[test]
fn trivial_cases() {
    let j = judgment(&["A", "B"]);
    assert_eq!(ndcg_at_k(&["A", "B"], &j, 2), 1.0);
    assert_eq!(ndcg_at_k(&["X", "Y"], &j, 2), 0.0);
    let one = judgment(&["A"]);
    assert_eq!(MetricTriple::compute(&["X"], &one, 1), MetricTriple::default());
    assert_eq!(MetricTriple::compute(&["A"], &one, 1), MetricTriple { ndcg: 1.0, recall: 1.0, map: 1.0 });
    assert!(RelevanceJudgment::new("q", Vec::<String>::new()).is_none());
}

fn record(tool: &str, args: Value) -> ToolCallRecord {
    ToolCallRecord {
        tool: tool.into(),
        server: "s".into(),
        arguments: args.as_object().cloned().unwrap_or_default(),
        result: None,
        error: None,
        latency_ms: 0,
    }
}

fn expected(tool: &str, args: Value) -> ExpectedCall {
    ExpectedCall { tool: tool.into(), args: args.as_object().cloned().unwrap_or_default() }
}

#[test]
fn tool_correctness_cases() {
    let exp = [expected("get_acme_revenue", json!({"year": 2024})), expected("get_acme_net_income", json!({"year": 2024}))];
    let exact = [record("get_acme_revenue", json!({"year": 2024})), record("get_acme_net_income", json!({"year": 2024}))];
    assert_eq!(tool_correctness(&exact, &exp), 1.0);
    assert_eq!(tool_correctness(&[], &exp), 0.0);
    let half = [record("get_acme_revenue", json!({"year": 2024})), record("get_acme_revenue", json!({"year": 2023}))];
    assert_eq!(tool_correctness(&half, &exp), 0.5);
    let stringy = [record("get_acme_revenue", json!({"year": "2024"}))];
    assert_eq!(tool_correctness(&stringy, &exp[..1]), 1.0);
    let nulls = [record("get_acme_revenue", json!({"year": null}))];
    assert_eq!(tool_correctness(&nulls, &[expected("get_acme_revenue", json!({}))]), 1.0);
    let dup = [record("get_acme_revenue", json!({"year": 2024})), record("get_acme_revenue", json!({"year": 2024}))];
    assert_eq!(tool_correctness(&dup, &exp), 0.5);
}

#[test]
fn judges() {
    let req = |outcome: &str| JudgeRequest {
        task: "t".into(),
        outcome: outcome.into(),
        reference: vec!["12.5".into(), "2024".into()],
    };
    assert_eq!(task_completion(&req("price 12.5 in 2024"), &ContainmentJudge), Some(1.0));
    assert_eq!(task_completion(&req("price 12.5"), &ContainmentJudge), Some(0.5));
    assert_eq!(task_completion(&req(""), &ContainmentJudge), Some(0.0));
    let fixed = FixedJudge { id: "stub".into(), score: 0.73 };
    assert_eq!(task_completion(&req("anything"), &fixed), Some(0.73));
}

#[test]
fn remote_judge_contract() {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let url = format!("http://{}/judge", server.server_addr().to_ip().unwrap());
    let worker = std::thread::spawn(move || {
        let mut req = server.recv().unwrap();
        let mut body = String::new();
        req.as_reader().read_to_string(&mut body).unwrap();
        let v: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(v, json!({"task": "t", "outcome": "o"}));
        req.respond(tiny_http::Response::from_string(r#"{"score":0.42}"#)).unwrap();
    });
    let judge = RemoteJudge::new(url, std::time::Duration::from_secs(5));
    let request = JudgeRequest { task: "t".into(), outcome: "o".into(), reference: vec![] };
    assert_eq!(task_completion(&request, &judge), Some(0.42));
    worker.join().unwrap();

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let down = RemoteJudge::new(format!("http://127.0.0.1:{port}/"), std::time::Duration::from_secs(2));
    assert_eq!(task_completion(&request, &down), None);
}

fn desk() -> (Vec<crate::dataset::CompanyServer>, Vec<QueryInstance>) {
    let fleet = generate_fleet(&bundled_roster()[..20]).unwrap();
    let instances = crate::dataset::generate_query_instances(
        &crate::dataset::bundled_base_queries()[..40],
        &bundled_roster()[..20],
        2,
        3,
    )
    .unwrap();
    (fleet, instances)
}

#[test]
fn grid_cells_and_identity_rerank() {
    let (fleet, instances) = desk();
    let provider = Arc::new(TokenHashProvider::new(256));
    let kinds = [StrategyKind::Concat, StrategyKind::Tdwa(ComponentWeights::VAR_1), StrategyKind::Tdwa(ComponentWeights::VAR_2)];
    let corpora = build_corpora(&fleet, &bundled_question_bank(), &[10], &kinds, provider).unwrap();
    let reports = run_retrieval_experiment(&instances, &corpora, &Retriever::ALL, &DEFAULT_KS, SearchOptions::default(), &IdentityReranker);
    assert_eq!(reports.len(), 12);
    for r in &reports {
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(r.queries, instances.len());
        for m in r.per_k.values().chain(r.per_query.iter().flat_map(|q| q.per_k.values())) {
            for x in [m.ndcg, m.recall, m.map] {
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
    for chunk in reports.chunks(4) {
        assert_eq!(chunk[0].config.retriever, Retriever::Vector);
        assert_eq!(chunk[3].config.retriever, Retriever::Rerank);
        assert_eq!(chunk[0].per_k, chunk[3].per_k);
        assert_eq!(chunk[0].per_query, chunk[3].per_query);
    }
    let table = render_table(&reports);
    assert_eq!(table.lines().count(), 14);
    assert!(table.lines().next().unwrap().contains("NDCG@1"));
    assert!(table.contains("[0.2, 0.3, 0, 0.5]"));
}

#[test]
fn single_instance_single_cell() {
    let (fleet, instances) = desk();
    let corpora = build_corpora(&fleet, &bundled_question_bank(), &[0], &[StrategyKind::Concat], Arc::new(TokenHashProvider::new(64))).unwrap();
    let one = &instances[..1];
    let reports = run_retrieval_experiment(one, &corpora, &[Retriever::Bm25], &[5], SearchOptions::default(), &IdentityReranker);
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].per_k[&5], reports[0].per_query[0].per_k[&5]);
    assert_eq!(render_table(&reports).lines().count(), 3);
}

#[test]
fn failing_cell_leaves_others_intact() {
    let (fleet, instances) = desk();
    let mut corpora = build_corpora(&fleet, &bundled_question_bank(), &[0], &[StrategyKind::Concat], Arc::new(TokenHashProvider::new(64))).unwrap();
    corpora[0].strategy = EmbeddingStrategy::concat(Arc::new(TokenHashProvider::new(32)));
    let reports = run_retrieval_experiment(&instances, &corpora, &[Retriever::Vector, Retriever::Bm25], &[5], SearchOptions::default(), &IdentityReranker);
    assert!(reports[0].error.is_some());
    assert!(reports[0].per_k.is_empty());
    assert!(reports[1].error.is_none());
    assert!(render_table(&reports).contains("error"));
}

fn ranking_strategy() -> impl Strategy<Value = (Vec<String>, Vec<String>, usize)> {
    (1usize..25).prop_flat_map(|n| {
        let pool: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        (
            Just(pool.clone()).prop_shuffle().prop_flat_map(move |p| {
                let len = p.len();
                (0..=len).prop_map(move |m| p[..m].to_vec())
            }),
            proptest::sample::subsequence(pool, 1..=n),
            1usize..15,
        )
    })
}

proptest! {
    #[test]
    fn metrics_bounded_and_monotone((ranking, golden, k) in ranking_strategy()) {
        let j = RelevanceJudgment::new("q", golden.clone()).unwrap();
        let a = MetricTriple::compute(&ranking, &j, k);
        let b = MetricTriple::compute(&ranking, &j, k + 1);
        for (x, y) in [(a.ndcg, b.ndcg), (a.recall, b.recall), (a.map, b.map)] {
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&y));
        }
        prop_assert!(a.recall <= b.recall);
        if golden.len() == 1 {
            let expect = ranking.iter().position(|t| *t == golden[0]).filter(|p| *p < k).map_or(0.0, |p| 1.0 / (p + 1) as f64);
            prop_assert_eq!(a.map, expect);
        }
    }

    #[test]
    fn recall_ignores_irrelevant_order((ranking, golden, k) in ranking_strategy(), seed in any::<u64>()) {
        let j = RelevanceJudgment::new("q", golden).unwrap();
        let last = ranking.iter().rposition(|t| j.golden.contains(t)).map_or(0, |p| p + 1);
        let mut permuted = ranking.clone();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut permuted[last..], &mut rng);
        prop_assert_eq!(recall_at_k(&permuted, &j, k), recall_at_k(&ranking, &j, k));
    }

    #[test]
    fn tool_correctness_is_order_free(years in proptest::collection::vec(2020i64..2025, 1..8), seed in any::<u64>()) {
        let exp: Vec<ExpectedCall> = years.iter().map(|y| expected("get_acme_revenue", json!({"year": y}))).collect();
        let calls: Vec<ToolCallRecord> = years.iter().step_by(2).map(|y| record("get_acme_revenue", json!({"year": y}))).collect();
        let score = tool_correctness(&calls, &exp);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let (mut e2, mut c2) = (exp.clone(), calls.clone());
        rand::seq::SliceRandom::shuffle(e2.as_mut_slice(), &mut rng);
        rand::seq::SliceRandom::shuffle(c2.as_mut_slice(), &mut rng);
        prop_assert_eq!(tool_correctness(&c2, &e2), score);
        prop_assert!((0.0..=1.0).contains(&score));
    }
}
