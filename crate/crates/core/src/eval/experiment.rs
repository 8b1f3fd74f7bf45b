//! Retrieval experiment grid: (strategy, SQ count, retriever) cells
//! scored at several K.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{MetricTriple, RelevanceJudgment};
use crate::dataset::{attach_synthetic_questions, CompanyServer, DatasetError, QueryInstance, QuestionBank};
use crate::embedding::{EmbeddingProvider, EmbeddingStrategy, StrategyKind};
use crate::index::{IndexStore, Reranker, Retriever};
use crate::retrieval::{search, SearchOptions};
use crate::sync::{build_store, SyncError};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// One index the grid searches: a strategy over the fleet with `sq` questions.
pub struct Corpus {
    pub sq: usize,
    pub strategy: EmbeddingStrategy,
    pub index: IndexStore,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error("corpus for {strategy} sq={sq} failed to build: {errors:?}")]
    Incomplete { strategy: String, sq: usize, errors: Vec<(String, String)> },
}

/// Builds one index per (SQ count, strategy) pair, in that order.
pub fn build_corpora(
    fleet: &[CompanyServer],
    bank: &QuestionBank,
    sq_counts: &[usize],
    strategies: &[StrategyKind],
    provider: Arc<dyn EmbeddingProvider>,
) -> Result<Vec<Corpus>, ExperimentError> {
    let mut out = Vec::new();
    for &sq in sq_counts {
        let mut fleet = fleet.to_vec();
        attach_synthetic_questions(&mut fleet, sq, bank)?;
        let tools: Vec<_> = fleet.into_iter().flat_map(|s| s.tools).collect();
        for &kind in strategies {
            let strategy = EmbeddingStrategy::new(kind, Arc::clone(&provider));
            let (store, report) = build_store(&tools, &strategy)?;
            if !report.errors.is_empty() {
                return Err(ExperimentError::Incomplete { strategy: kind.label(), sq, errors: report.errors });
            }
            out.push(Corpus { sq, strategy, index: store.index });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub strategy: String,
    pub weights: Option<[f64; 4]>,
    pub model: String,
    pub sq: usize,
    pub retriever: Retriever,
    pub reranker: Option<String>,
}

impl CellConfig {
    pub fn fingerprint(&self) -> String {
        let rr = self.reranker.as_deref().map(|r| format!("+{r}")).unwrap_or_default();
        format!("{}@{}/sq={}/{}{rr}", self.strategy, self.model, self.sq, self.retriever.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub per_k: BTreeMap<usize, MetricTriple>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: CellConfig,
    pub fingerprint: String,
    pub queries: usize,
    pub per_k: BTreeMap<usize, MetricTriple>,
    pub per_query: Vec<QueryMetrics>,
    /// Set when a retriever error stopped this cell; metrics are then empty.
    pub error: Option<String>,
}

pub fn judgments(instances: &[QueryInstance]) -> Vec<RelevanceJudgment> {
    instances
        .iter()
        .filter_map(|i| RelevanceJudgment::new(i.id.clone(), i.golden_tools()))
        .collect()
}

fn run_cell(
    instances: &[QueryInstance],
    judgments: &[RelevanceJudgment],
    corpus: &Corpus,
    options: SearchOptions,
    reranker: &dyn Reranker,
    ks: &[usize],
) -> MetricsReport {
    let kind = corpus.strategy.kind();
    let config = CellConfig {
        strategy: kind.label(),
        weights: match kind {
            StrategyKind::Tdwa(w) => Some(w.as_array()),
            StrategyKind::Concat => None,
        },
        model: corpus.strategy.provider().model_id().to_owned(),
        sq: corpus.sq,
        retriever: options.retriever,
        reranker: (options.retriever == Retriever::Rerank).then(|| reranker.id().to_owned()),
    };
    let fingerprint = config.fingerprint();
    let scored: Result<Vec<QueryMetrics>, String> = instances
        .iter()
        .zip(judgments)
        .map(|(inst, judgment)| {
            let per_k = ks
                .iter()
                .map(|&k| {
                    let ranked = search(&corpus.index, &corpus.strategy, reranker, &inst.query_text, k, &options)
                        .map_err(|e| format!("{}: {e}", inst.id))?;
                    Ok((k, MetricTriple::compute(&ranked.tool_ids(), judgment, k)))
                })
                .collect::<Result<_, String>>()?;
            Ok(QueryMetrics { query_id: inst.id.clone(), per_k })
        })
        .collect();
    match scored {
        Ok(per_query) => {
            let per_k = ks
                .iter()
                .map(|k| {
                    let items: Vec<MetricTriple> = per_query.iter().map(|q| q.per_k[k]).collect();
                    (*k, MetricTriple::mean(&items))
                })
                .collect();
            MetricsReport { config, fingerprint, queries: per_query.len(), per_k, per_query, error: None }
        }
        Err(e) => MetricsReport { config, fingerprint, queries: 0, per_k: BTreeMap::new(), per_query: vec![], error: Some(e) },
    }
}

/// Scores every (corpus, retriever) cell. Cells run in parallel; the
/// report order is corpus order, then retriever order.
pub fn run_retrieval_experiment(
    instances: &[QueryInstance],
    corpora: &[Corpus],
    retrievers: &[Retriever],
    ks: &[usize],
    base: SearchOptions,
    reranker: &dyn Reranker,
) -> Vec<MetricsReport> {
    let judgments = judgments(instances);
    assert_eq!(judgments.len(), instances.len(), "every instance needs at least one golden tool");
    let cells: Vec<(&Corpus, Retriever)> =
        corpora.iter().flat_map(|c| retrievers.iter().map(move |r| (c, *r))).collect();
    cells
        .par_iter()
        .map(|(corpus, retriever)| {
            let options = SearchOptions { retriever: *retriever, ..base };
            run_cell(instances, &judgments, corpus, options, reranker, ks)
        })
        .collect()
}

/// Aligned text table: one row per cell, an NDCG/Recall/MAP triple per K.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let ks: Vec<usize> = reports.iter().flat_map(|r| r.per_k.keys().copied()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let mut header = vec!["Retriever".to_owned(), "Embedding Model".into(), "Strategy".into(), "Weights".into(), "SQ".into()];
    for k in &ks {
        header.extend([format!("NDCG@{k}"), format!("Recall@{k}"), format!("MAP@{k}")]);
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let retriever = match &r.config.reranker {
                Some(id) => format!("rerank ({id})"),
                None => r.config.retriever.as_str().to_owned(),
            };
            let model = if r.config.retriever == Retriever::Bm25 { "--".to_owned() } else { r.config.model.clone() };
            let weights = r
                .config
                .weights
                .map(|w| format!("[{}]", w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")))
                .unwrap_or_else(|| "--".into());
            let mut row = vec![retriever, model, r.config.strategy.clone(), weights, r.config.sq.to_string()];
            for k in &ks {
                match r.per_k.get(k) {
                    Some(m) => row.extend([format!("{:.3}", m.ndcg), format!("{:.3}", m.recall), format!("{:.3}", m.map)]),
                    None => row.extend(["error".to_owned(), "error".into(), "error".into()]),
                }
            }
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&mut out, &header);
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for row in &rows {
        line(&mut out, row);
    }
    out
}
