use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};

use super::{check_consistency, HashLedger, SyncError};
use crate::index::IndexStore;

pub const LEDGER_FILE: &str = "ledger.jsonl";

/// Index plus the ledger describing it.
#[derive(Debug, Clone)]
pub struct ToolStore {
    pub index: IndexStore,
    pub ledger: HashLedger,
    /// Fingerprint of the embedding strategy the vectors came from.
    pub embedding: Option<String>,
}

impl ToolStore {
    pub fn new(dimension: usize) -> Self {
        Self { index: IndexStore::new(dimension), ledger: HashLedger::new(), embedding: None }
    }

    /// Writes the index snapshot, then the ledger.
    pub fn save(&self, dir: &Path) -> Result<(), SyncError> {
        self.index
            .snapshot_save(dir, self.embedding.as_deref())
            .map_err(SyncError::Storage)?;
        self.ledger.save(&dir.join(LEDGER_FILE))
    }

    /// Loads a saved store. Index entries the ledger does not know about
    /// come from a run that stopped between the two writes and are dropped.
    pub fn load(dir: &Path) -> Result<Self, SyncError> {
        let (mut index, manifest) = IndexStore::snapshot_load(dir).map_err(SyncError::Storage)?;
        let mut ledger = HashLedger::load(&dir.join(LEDGER_FILE))?;
        let orphans: Vec<_> = index.digests().filter(|d| !ledger.contains(d)).copied().collect();
        for d in orphans {
            log::warn!("dropping index entry {d} with no ledger record");
            index.remove(&d).map_err(SyncError::Storage)?;
        }
        ledger.retain(|d, _| index.contains(d));
        debug_assert!(check_consistency(&index, &ledger).is_ok());
        Ok(Self { index, ledger, embedding: manifest.embedding })
    }

    /// Loads `dir` if it holds a snapshot, otherwise starts empty.
    pub fn open_or_new(dir: &Path, dimension: usize) -> Result<Self, SyncError> {
        if IndexStore::snapshot_exists(dir) {
            Self::load(dir)
        } else {
            Ok(Self::new(dimension))
        }
    }
}

/// Readers share the current store; one writer at a time builds the next
/// version on a private copy and swaps it in on commit.
pub struct SharedStore {
    current: RwLock<Arc<ToolStore>>,
    writer: Mutex<()>,
    dir: Option<PathBuf>,
}

impl SharedStore {
    pub fn new(store: ToolStore) -> Self {
        Self { current: RwLock::new(Arc::new(store)), writer: Mutex::new(()), dir: None }
    }

    /// A store that is saved to `dir` on every commit.
    pub fn persistent(dir: impl Into<PathBuf>, dimension: usize) -> Result<Self, SyncError> {
        let dir = dir.into();
        let store = ToolStore::open_or_new(&dir, dimension)?;
        Ok(Self { current: RwLock::new(Arc::new(store)), writer: Mutex::new(()), dir: Some(dir) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn snapshot(&self) -> Arc<ToolStore> {
        Arc::clone(&self.current.read().unwrap_or_else(|p| p.into_inner()))
    }

    /// Takes the writer lease, or fails at once if another sync holds it.
    pub fn begin_sync(&self) -> Result<SyncLease<'_>, SyncError> {
        let guard = match self.writer.try_lock() {
            Ok(g) => g,
            Err(TryLockError::Poisoned(p)) => p.into_inner(),
            Err(TryLockError::WouldBlock) => return Err(SyncError::SyncInProgress),
        };
        let working = (*self.snapshot()).clone();
        Ok(SyncLease { shared: self, _guard: guard, working })
    }
}

pub struct SyncLease<'a> {
    shared: &'a SharedStore,
    _guard: MutexGuard<'a, ()>,
    pub working: ToolStore,
}

impl SyncLease<'_> {
    /// Persists (if the store has a directory) and publishes the working copy.
    pub fn commit(self) -> Result<(), SyncError> {
        if let Some(dir) = &self.shared.dir {
            self.working.save(dir)?;
        }
        *self.shared.current.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(self.working);
        Ok(())
    }
}
