//! Hash-diff synchronization of the index against live MCP servers.
//!
//! Every source tool is hashed; digests missing from the ledger are embedded
//! and inserted, ledger digests no source produces any more are removed.
//! An update is a delete of the old digest plus a create of the new one.

mod ledger;
mod store;

pub use ledger::{HashLedger, LedgerRecord};
pub use store::{SharedStore, SyncLease, ToolStore, LEDGER_FILE};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use chrono::Utc;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingStrategy;
use crate::index::{IndexEntry, IndexError, IndexStore};
use crate::mcp::{GatewayError, McpClient};
use crate::tool_model::{hash_tool, ModelError, ToolDocument, ToolHash};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SyncError {
    #[error("tool_id `{0}` appears twice in the source tool list")]
    DuplicateToolId(String),
    #[error(transparent)]
    InvalidTool(#[from] ModelError),
    #[error("another sync is in progress")]
    SyncInProgress,
    #[error("no servers to sync from")]
    NoServers,
    #[error("storage error: {0}")]
    Storage(IndexError),
    #[error("ledger: {0}")]
    Ledger(String),
}

pub const FETCH_PARALLELISM: usize = 32;

/// Where a sync reads the source of truth from.
pub trait ToolSource: Send + Sync {
    fn source_id(&self) -> &str;
    fn fetch_tools(&self) -> Result<Vec<ToolDocument>, GatewayError>;
}

impl ToolSource for McpClient {
    fn source_id(&self) -> &str {
        self.server_id()
    }

    fn fetch_tools(&self) -> Result<Vec<ToolDocument>, GatewayError> {
        self.list_tools()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTool {
    pub digest: ToolHash,
    pub document: ToolDocument,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SyncPlan {
    pub to_create: Vec<PlannedTool>,
    pub to_delete: Vec<ToolHash>,
    pub unchanged_count: usize,
    /// Tool ids skipped because an earlier source tool has the same digest.
    pub duplicate_digests: Vec<String>,
}

impl SyncPlan {
    pub fn is_empty(&self) -> bool {
        self.to_create.is_empty() && self.to_delete.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    pub created: usize,
    pub deleted: usize,
    pub unchanged: usize,
    pub duration_ms: u64,
    pub errors: Vec<(String, String)>,
    pub skipped_servers: Vec<String>,
    pub warnings: Vec<String>,
}

impl fmt::Display for SyncReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "created={} deleted={} unchanged={} errors={} skipped_servers={} duration_ms={}",
            self.created,
            self.deleted,
            self.unchanged,
            self.errors.len(),
            self.skipped_servers.len(),
            self.duration_ms
        )
    }
}

fn plan(source: Vec<ToolDocument>, ledger: &HashLedger, force: bool) -> Result<SyncPlan, SyncError> {
    let mut ids = HashSet::new();
    let mut seen = BTreeSet::new();
    let mut plan = SyncPlan::default();
    for doc in source {
        doc.validate()?;
        if !ids.insert(doc.tool_id.clone()) {
            return Err(SyncError::DuplicateToolId(doc.tool_id));
        }
        let digest = hash_tool(&doc);
        if !seen.insert(digest) {
            plan.duplicate_digests.push(doc.tool_id);
            continue;
        }
        if force || !ledger.contains(&digest) {
            plan.to_create.push(PlannedTool { digest, document: doc });
        } else {
            plan.unchanged_count += 1;
        }
    }
    plan.to_delete = ledger
        .digests()
        .filter(|d| force || !seen.contains(*d))
        .copied()
        .collect();
    Ok(plan)
}

/// Creates for digests the ledger lacks, deletes for ledger digests no
/// source tool produces.
pub fn compute_plan(source: Vec<ToolDocument>, ledger: &HashLedger) -> Result<SyncPlan, SyncError> {
    plan(source, ledger, false)
}

/// Treats every source tool as changed: everything in the ledger is deleted
/// and every source tool is embedded again.
pub fn compute_reindex_plan(source: Vec<ToolDocument>, ledger: &HashLedger) -> Result<SyncPlan, SyncError> {
    plan(source, ledger, true)
}

/// Applies deletes, then creates. Embedding failures are recorded per tool
/// and leave the ledger untouched for that tool. A storage failure stops the
/// run; everything applied before it stays applied, index first, ledger second.
pub fn apply_plan(plan: SyncPlan, store: &mut ToolStore, embedder: &EmbeddingStrategy) -> Result<SyncReport, SyncError> {
    let started = Instant::now();
    let mut report = SyncReport { unchanged: plan.unchanged_count, ..SyncReport::default() };
    for tool_id in &plan.duplicate_digests {
        report.warnings.push(format!("`{tool_id}` has the same digest as an earlier tool; first one kept"));
    }
    for digest in &plan.to_delete {
        match store.index.remove(digest) {
            Ok(_) | Err(IndexError::NotFound(_)) => {}
            Err(e) => return Err(SyncError::Storage(e)),
        }
        store.ledger.remove(digest);
        report.deleted += 1;
    }
    let embedded: Vec<_> = plan
        .to_create
        .par_iter()
        .map(|p| embedder.embed_document(&p.document))
        .collect();
    for (planned, result) in plan.to_create.into_iter().zip(embedded) {
        let PlannedTool { digest, document } = planned;
        let embedded = match result {
            Ok(e) => e,
            Err(e) => {
                report.errors.push((document.tool_id, e.to_string()));
                continue;
            }
        };
        // An index entry without a ledger record is left over from an
        // interrupted run; the fresh embedding replaces it.
        if store.index.contains(&digest) && !store.ledger.contains(&digest) {
            store.index.remove(&digest).map_err(SyncError::Storage)?;
        }
        match store.index.insert(IndexEntry::new(&document, digest, embedded)) {
            Ok(()) => {}
            Err(IndexError::DuplicateToolId(id)) => {
                report.errors.push((id, "tool_id is already indexed from another server".into()));
                continue;
            }
            Err(e) => {
                report.duration_ms = started.elapsed().as_millis() as u64;
                return Err(SyncError::Storage(e));
            }
        }
        store.ledger.insert(
            digest,
            LedgerRecord {
                tool_id: document.tool_id,
                origin_server: document.origin_server,
                indexed_at: Utc::now(),
            },
        );
        report.created += 1;
    }
    report.duration_ms = started.elapsed().as_millis() as u64;
    Ok(report)
}

/// Lists every source, plans against the ledger and applies the plan under
/// the store's writer lease.
///
/// Tools are deleted only if their origin server answered in this run, so a
/// server that is down keeps its previously indexed tools. When two servers
/// advertise the same tool id, the one registered first wins. If the store
/// was built with a different embedding strategy, everything is reindexed.
pub fn full_sync(
    sources: &[&dyn ToolSource],
    shared: &SharedStore,
    embedder: &EmbeddingStrategy,
    force_reindex: bool,
) -> Result<SyncReport, SyncError> {
    if sources.is_empty() {
        return Err(SyncError::NoServers);
    }
    let started = Instant::now();
    let mut lease = shared.begin_sync()?;
    let mut report = SyncReport::default();

    let fingerprint = embedder.fingerprint();
    let mut force = force_reindex;
    let stale_space = lease.working.embedding.as_deref().is_some_and(|e| e != fingerprint)
        || lease.working.index.dimension() != embedder.dimension();
    if stale_space {
        report.warnings.push(format!(
            "index was built with `{}`, reindexing with `{fingerprint}`",
            lease.working.embedding.as_deref().unwrap_or("unknown")
        ));
        report.deleted = lease.working.ledger.len();
        lease.working = ToolStore::new(embedder.dimension());
        force = true;
    }

    let mut responded = HashSet::new();
    let mut owner: HashMap<String, (String, ToolHash)> = HashMap::new();
    let mut source_tools = Vec::new();
    for (source, fetched) in sources.iter().zip(fetch_all(sources)) {
        let server = source.source_id();
        match fetched {
            Ok(tools) => {
                responded.insert(server.to_owned());
                for tool in tools {
                    let digest = hash_tool(&tool);
                    if let Some((first, first_digest)) = owner.get(&tool.tool_id) {
                        if *first_digest == digest {
                            report.warnings.push(format!(
                                "`{}` from `{server}` duplicates `{first}`'s digest; first server wins",
                                tool.tool_id
                            ));
                        } else {
                            report.errors.push((
                                tool.tool_id.clone(),
                                format!("also advertised by `{first}` with different content; keeping `{first}`'s"),
                            ));
                        }
                        continue;
                    }
                    owner.insert(tool.tool_id.clone(), (server.to_owned(), digest));
                    source_tools.push(tool);
                }
            }
            Err(e) => {
                log::warn!("skipping server `{server}`: {e}");
                report.skipped_servers.push(server.to_owned());
            }
        }
    }

    let mut plan = if force {
        compute_reindex_plan(source_tools, &lease.working.ledger)?
    } else {
        compute_plan(source_tools, &lease.working.ledger)?
    };
    let ledger = &lease.working.ledger;
    plan.to_delete
        .retain(|d| ledger.get(d).is_some_and(|r| responded.contains(&r.origin_server)));

    let applied = apply_plan(plan, &mut lease.working, embedder);
    lease.working.embedding = Some(fingerprint);
    match applied {
        Ok(r) => {
            report.created += r.created;
            report.deleted += r.deleted;
            report.unchanged += r.unchanged;
            report.errors.extend(r.errors);
            report.warnings.extend(r.warnings);
            lease.commit()?;
            report.duration_ms = started.elapsed().as_millis() as u64;
            Ok(report)
        }
        Err(e) => {
            lease.commit()?;
            Err(e)
        }
    }
}

/// Lists every source concurrently, `FETCH_PARALLELISM` at a time, so one
/// slow server costs one timeout rather than one per server.
fn fetch_all(sources: &[&dyn ToolSource]) -> Vec<Result<Vec<ToolDocument>, GatewayError>> {
    let mut out = Vec::with_capacity(sources.len());
    for chunk in sources.chunks(FETCH_PARALLELISM) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|src| s.spawn(move || src.fetch_tools())).collect();
            out.extend(handles.into_iter().map(|h| h.join().expect("tool listing panicked")));
        });
    }
    out
}

/// A fixed tool list, for tests and for indexing a dataset file directly.
pub struct StaticSource {
    pub id: String,
    pub tools: Result<Vec<ToolDocument>, GatewayError>,
}

impl StaticSource {
    pub fn new(id: impl Into<String>, tools: Vec<ToolDocument>) -> Self {
        Self { id: id.into(), tools: Ok(tools) }
    }

    pub fn unreachable(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            tools: Err(GatewayError::ServerUnreachable { server: id.clone(), message: "offline".into() }),
            id,
        }
    }
}

impl ToolSource for StaticSource {
    fn source_id(&self) -> &str {
        &self.id
    }

    fn fetch_tools(&self) -> Result<Vec<ToolDocument>, GatewayError> {
        self.tools.clone()
    }
}

/// Builds an index from scratch from the given documents.
pub fn build_store(tools: &[ToolDocument], embedder: &EmbeddingStrategy) -> Result<(ToolStore, SyncReport), SyncError> {
    let mut store = ToolStore::new(embedder.dimension());
    let plan = compute_plan(tools.to_vec(), &store.ledger)?;
    let report = apply_plan(plan, &mut store, embedder)?;
    store.embedding = Some(embedder.fingerprint());
    Ok((store, report))
}

/// Index entries and ledger records must describe the same digests.
pub fn check_consistency(index: &IndexStore, ledger: &HashLedger) -> Result<(), String> {
    for d in ledger.digests() {
        if !index.contains(d) {
            return Err(format!("ledger digest {d} has no index entry"));
        }
    }
    for d in index.digests() {
        if !ledger.contains(d) {
            return Err(format!("index digest {d} has no ledger record"));
        }
    }
    Ok(())
}
