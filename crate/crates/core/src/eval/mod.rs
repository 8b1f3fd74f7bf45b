//! Retrieval metrics, episode scoring and the experiment grid.

mod correctness;
mod experiment;
mod metrics;
#[cfg(test)]
mod tests;

pub use correctness::{
    task_completion, tool_correctness, ContainmentJudge, EpisodeJudgment, FixedJudge, Judge, JudgeError, JudgeRequest,
    RemoteJudge,
};
pub use experiment::{
    build_corpora, judgments, render_table, run_retrieval_experiment, CellConfig, Corpus, ExperimentError, MetricsReport,
    QueryMetrics, DEFAULT_KS,
};
pub use metrics::{map_at_k, ndcg_at_k, recall_at_k, MetricTriple, RelevanceJudgment};
