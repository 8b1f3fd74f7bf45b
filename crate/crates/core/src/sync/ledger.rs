//! Digest ledger: which tool versions the index currently holds.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::SyncError;
use crate::tool_model::ToolHash;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerRecord {
    pub tool_id: String,
    pub origin_server: String,
    pub indexed_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct LedgerLine {
    digest: ToolHash,
    tool_id: String,
    origin_server: String,
    indexed_at: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HashLedger {
    entries: BTreeMap<ToolHash, LedgerRecord>,
}

impl HashLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, digest: &ToolHash) -> bool {
        self.entries.contains_key(digest)
    }

    pub fn get(&self, digest: &ToolHash) -> Option<&LedgerRecord> {
        self.entries.get(digest)
    }

    pub fn insert(&mut self, digest: ToolHash, record: LedgerRecord) {
        self.entries.insert(digest, record);
    }

    pub fn remove(&mut self, digest: &ToolHash) -> Option<LedgerRecord> {
        self.entries.remove(digest)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ToolHash, &LedgerRecord)> {
        self.entries.iter()
    }

    pub fn digests(&self) -> impl Iterator<Item = &ToolHash> {
        self.entries.keys()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&ToolHash, &LedgerRecord) -> bool) {
        self.entries.retain(|d, r| keep(d, r));
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (digest, r) in &self.entries {
            let line = LedgerLine {
                digest: *digest,
                tool_id: r.tool_id.clone(),
                origin_server: r.origin_server.clone(),
                indexed_at: r.indexed_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            };
            out.push_str(&serde_json::to_string(&line).expect("ledger line serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SyncError> {
        let mut ledger = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |e: String| SyncError::Ledger(format!("line {}: {e}", n + 1));
            let l: LedgerLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let indexed_at = DateTime::parse_from_rfc3339(&l.indexed_at)
                .map_err(|e| bad(format!("indexed_at: {e}")))?
                .with_timezone(&Utc);
            if ledger.contains(&l.digest) {
                return Err(bad(format!("digest {} listed twice", l.digest)));
            }
            ledger.insert(l.digest, LedgerRecord { tool_id: l.tool_id, origin_server: l.origin_server, indexed_at });
        }
        Ok(ledger)
    }

    pub fn load(path: &Path) -> Result<Self, SyncError> {
        match fs::read_to_string(path) {
            Ok(text) => Self::from_jsonl(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(SyncError::Ledger(format!("{}: {e}", path.display()))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SyncError> {
        let err = |e: std::io::Error| SyncError::Ledger(format!("{}: {e}", path.display()));
        let tmp = path.with_extension("jsonl.tmp");
        let mut f = fs::File::create(&tmp).map_err(err)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(err)?;
        f.sync_all().map_err(err)?;
        fs::rename(&tmp, path).map_err(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn jsonl_round_trip() {
        let mut ledger = HashLedger::new();
        let at = Utc.with_ymd_and_hms(2025, 3, 1, 12, 0, 0).unwrap() + chrono::Duration::microseconds(1234);
        ledger.insert(
            ToolHash::of_text("a"),
            LedgerRecord { tool_id: "get_acme_revenue".into(), origin_server: "acme".into(), indexed_at: at },
        );
        ledger.insert(
            ToolHash::of_text("b"),
            LedgerRecord { tool_id: "get_acme_net_income".into(), origin_server: "acme".into(), indexed_at: at },
        );
        let text = ledger.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["digest", "indexed_at", "origin_server", "tool_id"]);
        assert_eq!(HashLedger::from_jsonl(&text).unwrap(), ledger);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        ledger.save(&path).unwrap();
        assert_eq!(HashLedger::load(&path).unwrap(), ledger);
        assert!(HashLedger::load(&dir.path().join("missing.jsonl")).unwrap().is_empty());
    }

    #[test]
    fn rejects_repeated_digest() {
        let line = format!(
            "{{\"digest\":\"{}\",\"tool_id\":\"t\",\"origin_server\":\"s\",\"indexed_at\":\"2025-01-01T00:00:00Z\"}}\n",
            ToolHash::of_text("x")
        );
        assert!(matches!(HashLedger::from_jsonl(&line.repeat(2)), Err(SyncError::Ledger(_))));
    }
}
