use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use cordscope::query::Value;
use cordscope::store::{Store, StoreError};
use cordscope::AnalyzedPaper;

/// An immutable view of the store as of one load.
#[derive(Debug)]
pub struct Snapshot {
    pub generation: u64,
    pub papers: Vec<AnalyzedPaper>,
    /// The same papers in query-engine form.
    pub documents: Vec<Value>,
}

impl Snapshot {
    pub fn from_papers(generation: u64, papers: Vec<AnalyzedPaper>) -> Self {
        let documents = papers.iter().map(|p| Value::from(p.to_json_value())).collect();
        Self { generation, papers, documents }
    }

    pub fn load(generation: u64, root: &Path) -> Result<Self, StoreError> {
        let papers = Store::open(root)?.load_all()?;
        Ok(Self::from_papers(generation, papers))
    }
}

pub const DEFAULT_QUERY_CAP: usize = 10_000;

pub struct AppState {
    root: Option<PathBuf>,
    snapshot: RwLock<Arc<Snapshot>>,
    generation: AtomicU64,
    pub query_cap: usize,
}

impl AppState {
    /// Loads the store at `root`; reloads reread it.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        let snapshot = Snapshot::load(1, &root)?;
        Ok(Self {
            root: Some(root),
            snapshot: RwLock::new(Arc::new(snapshot)),
            generation: AtomicU64::new(1),
            query_cap: DEFAULT_QUERY_CAP,
        })
    }

    /// A fixed in-memory snapshot; reload keeps it.
    pub fn from_papers(papers: Vec<AnalyzedPaper>) -> Self {
        Self {
            root: None,
            snapshot: RwLock::new(Arc::new(Snapshot::from_papers(1, papers))),
            generation: AtomicU64::new(1),
            query_cap: DEFAULT_QUERY_CAP,
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    /// Reads the store again and swaps the snapshot in. Requests already
    /// holding the old snapshot keep it.
    pub fn reload(&self) -> Result<Arc<Snapshot>, StoreError> {
        let generation = self.generation.fetch_add(1, Ordering::SeqCst) + 1;
        let next = match &self.root {
            Some(root) => Snapshot::load(generation, root)?,
            None => Snapshot::from_papers(generation, self.snapshot().papers.clone()),
        };
        let next = Arc::new(next);
        *self.snapshot.write().expect("snapshot lock") = next.clone();
        Ok(next)
    }
}
