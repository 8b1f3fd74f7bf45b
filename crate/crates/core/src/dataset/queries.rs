//! Base query templates and the query instances expanded from them.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::fleet::{check_arguments, ToolTemplate};
use super::market::splitmix64;
use super::roster::{CompanyRecord, SurfaceForm};
use super::DatasetError;

const BUNDLED: &str = include_str!("../../data/base_queries.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCall {
    pub name: String,
    #[serde(default)]
    pub args: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseQuery {
    pub query: String,
    pub tool_calls: Vec<BaseCall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCall {
    pub tool: String,
    #[serde(default)]
    pub args: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryInstance {
    pub id: String,
    pub query_text: String,
    pub expected_calls: Vec<ExpectedCall>,
    /// Slugs of the referenced companies, in placeholder order.
    pub company_refs: Vec<String>,
    pub hops: usize,
    /// Index of the base query this instance came from.
    pub template: usize,
}

impl QueryInstance {
    /// Distinct expected tool names, in first-call order.
    pub fn golden_tools(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.expected_calls.iter().filter(|c| seen.insert(&c.tool)).map(|c| c.tool.clone()).collect()
    }
}

pub fn bundled_base_queries() -> Vec<BaseQuery> {
    serde_json::from_str(BUNDLED).expect("bundled base queries parse")
}

pub fn load_base_queries(path: &Path) -> Result<Vec<BaseQuery>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json(e.to_string()))
}

/// Every `{company}` / `{company N}` placeholder in `text`, in first-seen order.
fn placeholders(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{company") {
        let Some(len) = rest[start..].find('}') else { break };
        let ph = &rest[start..=start + len];
        let inner = &ph[1..ph.len() - 1];
        let valid = inner == "company"
            || inner.strip_prefix("company ").is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()));
        if valid && !out.iter().any(|p| p == ph) {
            out.push(ph.to_owned());
        }
        rest = &rest[start + len + 1..];
    }
    out
}

struct Compiled {
    placeholders: Vec<String>,
    /// (placeholder index, template) per call.
    calls: Vec<(usize, &'static ToolTemplate, Map<String, Value>)>,
}

fn compile(index: usize, base: &BaseQuery) -> Result<Compiled, DatasetError> {
    let mismatch = |why: String| DatasetError::PlaceholderMismatch { template: index, reason: why };
    let query_ph = placeholders(&base.query);
    if query_ph.is_empty() {
        return Err(mismatch("query has no company placeholder".into()));
    }
    if base.tool_calls.is_empty() {
        return Err(mismatch("template has no tool calls".into()));
    }
    let mut calls = Vec::new();
    let mut used = BTreeSet::new();
    for call in &base.tool_calls {
        let unknown = || DatasetError::UnknownTool { template: index, tool: call.name.clone() };
        let rest = call.name.strip_prefix("get_").ok_or_else(unknown)?;
        let ph_end = rest.find('}').filter(|_| rest.starts_with('{')).ok_or_else(unknown)?;
        let ph = &rest[..=ph_end];
        let suffix = rest[ph_end + 1..].strip_prefix('_').ok_or_else(unknown)?;
        let template = ToolTemplate::by_suffix(suffix).ok_or_else(unknown)?;
        let slot = query_ph
            .iter()
            .position(|p| p == ph)
            .ok_or_else(|| mismatch(format!("call `{}` uses {ph}, which the query never mentions", call.name)))?;
        let probe = template.instantiate(&CompanyRecord::new("probe", "PRB", vec!["probe".into()]));
        check_arguments(&probe, &call.args).map_err(|reason| DatasetError::InvalidCall { template: index, reason })?;
        used.insert(slot);
        calls.push((slot, template, call.args.clone()));
    }
    if let Some(unused) = (0..query_ph.len()).find(|i| !used.contains(i)) {
        return Err(mismatch(format!("query mentions {} but no call uses it", query_ph[unused])));
    }
    Ok(Compiled { placeholders: query_ph, calls })
}

/// Checks every template without expanding it.
pub fn validate_base_queries(base: &[BaseQuery]) -> Result<(), DatasetError> {
    base.iter().enumerate().try_for_each(|(i, q)| compile(i, q).map(|_| ()))
}

/// Expands each template over up to `max_per_template` seeded draws of
/// distinct companies. Templates naming more companies than the roster
/// holds are skipped.
pub fn generate_query_instances(
    base: &[BaseQuery],
    companies: &[CompanyRecord],
    max_per_template: usize,
    seed: u64,
) -> Result<Vec<QueryInstance>, DatasetError> {
    let compiled: Vec<Compiled> = base.iter().enumerate().map(|(i, q)| compile(i, q)).collect::<Result<_, _>>()?;
    let n = companies.len();
    let per_template: Vec<Vec<QueryInstance>> = compiled
        .par_iter()
        .enumerate()
        .map(|(ti, c)| {
            let p = c.placeholders.len();
            if p > n {
                return Vec::new();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(ti as u64)));
            let count = max_per_template.min(n);
            let singles: Vec<usize> = if p == 1 { sample(&mut rng, n, count).into_vec() } else { vec![] };
            (0..count)
                .map(|j| {
                    let picked: Vec<usize> = if p == 1 { vec![singles[j]] } else { sample(&mut rng, n, p).into_vec() };
                    let mut text = base[ti].query.clone();
                    for (ph, &ci) in c.placeholders.iter().zip(&picked) {
                        let form = SurfaceForm::CYCLE[rng.gen_range(0..3)];
                        text = text.replace(ph.as_str(), companies[ci].surface(form));
                    }
                    let expected_calls: Vec<ExpectedCall> = c
                        .calls
                        .iter()
                        .map(|(slot, t, args)| ExpectedCall {
                            tool: t.tool_name(&companies[picked[*slot]].slug()),
                            args: args.clone(),
                        })
                        .collect();
                    QueryInstance {
                        id: format!("q{ti:04}-{j:04}"),
                        query_text: text,
                        hops: expected_calls.len(),
                        expected_calls,
                        company_refs: picked.iter().map(|&ci| companies[ci].slug()).collect(),
                        template: ti,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_template.into_iter().flatten().collect())
}

pub fn average_hops(instances: &[QueryInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    instances.iter().map(|i| i.hops as f64).sum::<f64>() / instances.len() as f64
}
