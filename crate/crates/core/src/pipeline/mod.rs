//! Sharded, resumable processing of a metadata file into document stores.
//!
//! Each shard owns a store with a `checkpoint.json` beside its segments.
//! [`run`] with [`NodeSelection::All`] processes every shard on a thread
//! pool and merges the shard stores into the root store.

mod backend;
mod checkpoint;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::Serialize;

pub use backend::{Backend, BatchOutcome, DocFailure, Fatal, LocalBackend, MockBackend, RemoteBackend};
pub use checkpoint::{Checkpoint, FailedId, CHECKPOINT_FILE};

use crate::corpus::{dedupe, parse_metadata, shard_filter, IngestError, PaperRecord, ShardError};
use crate::ner::{AnalyzedPaper, Gazetteer, LocalExtractor, NegationConfig, RetryPolicy, TextAnalyticsClient};
use crate::store::{Store, StoreError};

pub const SHARDS_DIR: &str = "shards";

pub fn shard_dir(root: &Path, shard: usize) -> PathBuf {
    root.join(SHARDS_DIR).join(format!("shard-{shard:03}"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendConfig {
    /// Bundled gazetteer unless a TSV path is given.
    Local { gazetteer: Option<PathBuf> },
    /// Endpoint and key fall back to the environment.
    Remote { endpoint: Option<String>, key: Option<String> },
    /// JSON Lines of canned result documents.
    Mock { results: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    One(usize),
    All,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub metadata_path: PathBuf,
    pub store_root: PathBuf,
    pub backend: BackendConfig,
    pub nodes: usize,
    pub node: NodeSelection,
    pub retry: RetryPolicy,
    pub checkpoint_interval: usize,
    pub retry_failed: bool,
    pub workers: usize,
    /// Only the first `limit` metadata rows.
    pub limit: Option<usize>,
}

impl PipelineConfig {
    pub fn new(metadata_path: impl Into<PathBuf>, store_root: impl Into<PathBuf>, backend: BackendConfig) -> Self {
        Self {
            metadata_path: metadata_path.into(),
            store_root: store_root.into(),
            backend,
            nodes: 1,
            node: NodeSelection::One(0),
            retry: RetryPolicy::default(),
            checkpoint_interval: 100,
            retry_failed: false,
            workers: 1,
            limit: None,
        }
    }

    fn validate(&self) -> Result<(), PipelineError> {
        if let NodeSelection::One(node) = self.node {
            shard_filter(0, node, self.nodes)?;
        } else if self.nodes == 0 {
            return Err(ShardError::ZeroNodes.into());
        }
        if self.checkpoint_interval == 0 {
            return Err(PipelineError::Config("checkpoint interval must be positive".into()));
        }
        if self.workers == 0 {
            return Err(PipelineError::Config("worker count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Shard(#[from] ShardError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("checkpoint belongs to shard {found_shard} of {found_nodes}, not {shard} of {nodes}")]
    CheckpointMismatch { shard: usize, nodes: usize, found_shard: usize, found_nodes: usize },
    #[error("shard {shard}: {message}")]
    Fatal { shard: usize, message: String },
    #[error("{} shard(s) failed: {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Shards(Vec<PipelineError>),
}

/// Deduplicated metadata plus what ingestion dropped.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub records: Vec<PaperRecord>,
    pub rows: usize,
    pub duplicates: usize,
    pub dropped_empty_id: usize,
    pub malformed_dates: usize,
}

pub fn load_corpus(path: &Path, limit: Option<usize>) -> Result<Corpus, PipelineError> {
    let file = fs::File::open(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    let ingested = parse_metadata(file).map_err(|source| PipelineError::Ingest { path: path.to_path_buf(), source })?;
    let mut records = ingested.records;
    if let Some(limit) = limit {
        records.truncate(limit);
    }
    let rows = records.len();
    let (records, duplicates) = dedupe(records);
    Ok(Corpus { records, rows, duplicates, dropped_empty_id: ingested.dropped_empty_id, malformed_dates: ingested.malformed_dates })
}

pub fn build_backend(config: &BackendConfig, retry: &RetryPolicy) -> Result<Arc<dyn Backend>, PipelineError> {
    Ok(match config {
        BackendConfig::Local { gazetteer } => {
            let gazetteer = match gazetteer {
                None => Gazetteer::bundled(),
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
                    Gazetteer::from_tsv(text.as_bytes()).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
                }
            };
            Arc::new(LocalBackend::new(LocalExtractor::new(gazetteer, NegationConfig::default())))
        }
        BackendConfig::Remote { endpoint, key } => {
            let client = match (endpoint, key) {
                (Some(endpoint), Some(key)) => TextAnalyticsClient::new(endpoint.clone(), key.clone()),
                (None, None) => TextAnalyticsClient::from_env(),
                _ => return Err(PipelineError::Config("remote backend needs both an endpoint and a key".into())),
            }
            .map_err(|e| PipelineError::Config(e.to_string()))?;
            Arc::new(RemoteBackend::new(client, retry.clone()))
        }
        BackendConfig::Mock { results } => Arc::new(MockBackend::from_jsonl(results).map_err(|e| PipelineError::Config(e.0))?),
    })
}

/// Documents finished across all running shards.
#[derive(Debug, Default)]
pub struct Progress {
    done: AtomicUsize,
}

impl Progress {
    pub fn done(&self) -> usize {
        self.done.load(Ordering::Relaxed)
    }

    fn add(&self, n: usize) {
        let before = self.done.fetch_add(n, Ordering::Relaxed);
        if (before + n) / 100 > before / 100 {
            tracing::info!(done = before + n, "documents processed");
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedDoc {
    pub id: String,
    pub index: usize,
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShardReport {
    pub shard: usize,
    pub processed: usize,
    pub skipped_empty_abstract: usize,
    pub failed: Vec<FailedDoc>,
    /// Checkpointed index this run resumed after.
    pub resumed_after: Option<usize>,
    #[serde(serialize_with = "seconds")]
    pub elapsed: Duration,
}

fn seconds<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub rows: usize,
    pub duplicates: usize,
    pub dropped_empty_id: usize,
    pub malformed_dates: usize,
    pub shards: Vec<ShardReport>,
    /// Documents copied into the root store by the merge step.
    pub merged: Option<usize>,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.shards.iter().map(|s| s.failed.len()).sum()
    }

    pub fn processed(&self) -> usize {
        self.shards.iter().map(|s| s.processed).sum()
    }

    pub fn skipped(&self) -> usize {
        self.shards.iter().map(|s| s.skipped_empty_abstract).sum()
    }

    /// 0 when clean, 3 when some documents failed.
    pub fn exit_code(&self) -> i32 {
        if self.failed() == 0 {
            0
        } else {
            3
        }
    }
}

/// Settings one shard needs, independent of where its records came from.
#[derive(Clone, Copy)]
pub struct ShardJob<'a> {
    pub records: &'a [PaperRecord],
    pub shard: usize,
    pub nodes: usize,
    pub store_root: &'a Path,
    pub checkpoint_interval: usize,
    pub retry_failed: bool,
}

/// Processes one shard into `job.store_root`, resuming from its checkpoint.
pub fn run_shard(job: ShardJob<'_>, backend: &dyn Backend, progress: &Progress) -> Result<ShardReport, PipelineError> {
    let started = Instant::now();
    shard_filter(0, job.shard, job.nodes)?;
    let store = Store::open_writer(job.store_root)?;
    let mut checkpoint =
        match Checkpoint::load(job.store_root).map_err(|source| PipelineError::Io { path: Checkpoint::path(job.store_root), source })? {
            Some(c) if c.shard != job.shard || c.nodes != job.nodes => {
                return Err(PipelineError::CheckpointMismatch {
                    shard: job.shard,
                    nodes: job.nodes,
                    found_shard: c.shard,
                    found_nodes: c.nodes,
                })
            }
            Some(c) => c,
            None => Checkpoint::new(job.shard, job.nodes),
        };
    let resumed_after = checkpoint.last_processed_index;

    let mut work: Vec<usize> = (0..job.records.len())
        .filter(|&i| shard_filter(i, job.shard, job.nodes) == Ok(true) && resumed_after.is_none_or(|last| i > last))
        .collect();
    if job.retry_failed {
        let retried = std::mem::take(&mut checkpoint.failed_ids);
        work.extend(retried.iter().map(|f| f.index).filter(|&i| i < job.records.len()));
        work.sort_unstable();
        work.dedup();
    }

    let mut report = ShardReport {
        shard: job.shard,
        processed: 0,
        skipped_empty_abstract: 0,
        failed: Vec::new(),
        resumed_after,
        elapsed: Duration::ZERO,
    };
    let save = |store: &Store, checkpoint: &Checkpoint| -> Result<(), PipelineError> {
        store.flush()?;
        checkpoint.save(job.store_root).map_err(|source| PipelineError::Io { path: Checkpoint::path(job.store_root), source })
    };

    let mut since_checkpoint = 0;
    for chunk in work.chunks(backend.batch_size().max(1)) {
        let mut pending: Vec<usize> = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let r = &job.records[i];
            if r.abstract_text.trim().is_empty() {
                store.upsert(&AnalyzedPaper::new(r.cord_uid.clone(), r.title.clone(), r.publish_time))?;
                report.skipped_empty_abstract += 1;
                checkpoint.processed += 1;
            } else {
                pending.push(i);
            }
        }
        if !pending.is_empty() {
            let batch: Vec<&PaperRecord> = pending.iter().map(|&i| &job.records[i]).collect();
            let outcomes = match backend.analyze(&batch) {
                Ok(o) => o,
                Err(Fatal(message)) => {
                    save(&store, &checkpoint)?;
                    return Err(PipelineError::Fatal { shard: job.shard, message });
                }
            };
            for (&i, (_, outcome)) in pending.iter().zip(outcomes) {
                match outcome {
                    Ok(paper) => {
                        store.upsert(&paper)?;
                        report.processed += 1;
                        checkpoint.processed += 1;
                    }
                    Err(f) => {
                        let id = job.records[i].cord_uid.clone();
                        tracing::warn!(shard = job.shard, %id, class = %f.class, "document failed: {}", f.message);
                        checkpoint.failed_ids.push(FailedId { id: id.clone(), index: i, class: f.class.clone() });
                        report.failed.push(FailedDoc { id, index: i, class: f.class, message: f.message });
                    }
                }
            }
        }
        if let Some(&last) = chunk.last() {
            checkpoint.advance(last);
        }
        progress.add(chunk.len());
        since_checkpoint += chunk.len();
        if since_checkpoint >= job.checkpoint_interval {
            save(&store, &checkpoint)?;
            since_checkpoint = 0;
        }
    }
    save(&store, &checkpoint)?;
    report.elapsed = started.elapsed();
    Ok(report)
}

fn shard_job<'a>(config: &PipelineConfig, records: &'a [PaperRecord], shard: usize, store_root: &'a Path) -> ShardJob<'a> {
    ShardJob {
        records,
        shard,
        nodes: config.nodes,
        store_root,
        checkpoint_interval: config.checkpoint_interval,
        retry_failed: config.retry_failed,
    }
}

/// Runs the configured shard, or every shard followed by a merge.
pub fn run(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let backend = build_backend(&config.backend, &config.retry)?;
    run_with_backend(config, backend.as_ref())
}

pub fn run_with_backend(config: &PipelineConfig, backend: &dyn Backend) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let corpus = load_corpus(&config.metadata_path, config.limit)?;
    let progress = Progress::default();
    let (shards, merged) = match config.node {
        NodeSelection::One(node) => {
            (vec![run_shard(shard_job(config, &corpus.records, node, &config.store_root), backend, &progress)?], None)
        }
        NodeSelection::All => {
            let roots: Vec<PathBuf> = (0..config.nodes).map(|s| shard_dir(&config.store_root, s)).collect();
            let next = AtomicUsize::new(0);
            let results: Mutex<Vec<Option<Result<ShardReport, PipelineError>>>> = Mutex::new((0..config.nodes).map(|_| None).collect());
            std::thread::scope(|scope| {
                for _ in 0..config.workers.min(config.nodes) {
                    scope.spawn(|| loop {
                        let shard = next.fetch_add(1, Ordering::SeqCst);
                        if shard >= config.nodes {
                            break;
                        }
                        let outcome = run_shard(shard_job(config, &corpus.records, shard, &roots[shard]), backend, &progress);
                        results.lock().expect("results lock")[shard] = Some(outcome);
                    });
                }
            });
            let mut reports = Vec::new();
            let mut errors = Vec::new();
            for outcome in results.into_inner().expect("results lock") {
                match outcome.expect("every shard ran") {
                    Ok(r) => reports.push(r),
                    Err(e) => errors.push(e),
                }
            }
            if !errors.is_empty() {
                return Err(PipelineError::Shards(errors));
            }
            let root = Store::open_writer(&config.store_root)?;
            let merged = root.merge_from(&roots)?;
            (reports, Some(merged))
        }
    };
    Ok(RunReport {
        rows: corpus.rows,
        duplicates: corpus.duplicates,
        dropped_empty_id: corpus.dropped_empty_id,
        malformed_dates: corpus.malformed_dates,
        shards,
        merged,
    })
}
