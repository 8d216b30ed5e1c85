use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use crate::corpus::PaperRecord;
use crate::ner::remote::{RemoteDocument, MAX_BATCH};
use crate::ner::wire::{job_document_errors, parse_job_results, parse_result_value};
use crate::ner::{AnalyzedPaper, LocalExtractor, RemoteError, RetryPolicy, TextAnalyticsClient};

/// Why one document could not be analyzed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocFailure {
    pub class: String,
    pub message: String,
}

impl DocFailure {
    pub fn new(class: &str, message: impl Into<String>) -> Self {
        Self { class: class.to_string(), message: message.into() }
    }
}

/// An error that ends the run (bad credentials, bad configuration).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct Fatal(pub String);

pub type BatchOutcome = Vec<(String, Result<AnalyzedPaper, DocFailure>)>;

/// Something that turns paper records into analyzed papers.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn batch_size(&self) -> usize {
        1
    }

    /// One outcome per input record, in input order. Records always have
    /// non-empty abstracts.
    fn analyze(&self, records: &[&PaperRecord]) -> Result<BatchOutcome, Fatal>;
}

fn with_meta(record: &PaperRecord) -> AnalyzedPaper {
    AnalyzedPaper::new(record.cord_uid.clone(), record.title.clone(), record.publish_time)
}

pub struct LocalBackend {
    extractor: LocalExtractor,
}

impl LocalBackend {
    pub fn new(extractor: LocalExtractor) -> Self {
        Self { extractor }
    }
}

impl Backend for LocalBackend {
    fn name(&self) -> &str {
        "local"
    }

    fn batch_size(&self) -> usize {
        16
    }

    fn analyze(&self, records: &[&PaperRecord]) -> Result<BatchOutcome, Fatal> {
        Ok(records
            .iter()
            .map(|r| {
                let mut paper = with_meta(r);
                let (entities, relations) = self.extractor.analyze(&r.abstract_text);
                paper.entities = entities;
                paper.relations = relations;
                (r.cord_uid.clone(), Ok(paper))
            })
            .collect())
    }
}

/// Replays canned result documents keyed by id.
pub struct MockBackend {
    canned: HashMap<String, Value>,
}

impl MockBackend {
    pub fn new(canned: HashMap<String, Value>) -> Self {
        Self { canned }
    }

    /// Reads JSON Lines, one result document (with an `id`) per line.
    pub fn from_jsonl(path: &Path) -> Result<Self, Fatal> {
        let file = fs::File::open(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
        let mut canned = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Fatal(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(&line).map_err(|e| Fatal(format!("{}:{}: {e}", path.display(), n + 1)))?;
            let id = v
                .get("id")
                .and_then(Value::as_str)
                .ok_or_else(|| Fatal(format!("{}:{}: result document has no id", path.display(), n + 1)))?
                .to_string();
            canned.insert(id, v);
        }
        Ok(Self { canned })
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn analyze(&self, records: &[&PaperRecord]) -> Result<BatchOutcome, Fatal> {
        Ok(records
            .iter()
            .map(|r| {
                let outcome = match self.canned.get(&r.cord_uid) {
                    Some(doc) => parse_result_value(doc.clone(), r).map_err(|e| DocFailure::new("parse", e.to_string())),
                    None => Err(DocFailure::new("missing", "no canned result for this id")),
                };
                (r.cord_uid.clone(), outcome)
            })
            .collect())
    }
}

/// The hosted job protocol: submit a batch, poll, decode.
pub struct RemoteBackend {
    client: TextAnalyticsClient,
    policy: RetryPolicy,
}

impl RemoteBackend {
    pub fn new(client: TextAnalyticsClient, policy: RetryPolicy) -> Self {
        Self { client, policy }
    }

    fn run_job(&self, records: &[&PaperRecord]) -> Result<Value, RemoteError> {
        let docs: Vec<RemoteDocument> = records.iter().map(|r| RemoteDocument::new(r.cord_uid.clone(), r.abstract_text.clone())).collect();
        let handle = self.client.submit_with_retry(&docs, &self.policy)?;
        self.client.poll_job(&handle, &self.policy)
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    fn batch_size(&self) -> usize {
        MAX_BATCH
    }

    fn analyze(&self, records: &[&PaperRecord]) -> Result<BatchOutcome, Fatal> {
        let job = match self.run_job(records) {
            Ok(job) => job,
            Err(e) if e.is_fatal_for_run() => return Err(Fatal(e.to_string())),
            Err(e) => {
                let failure = DocFailure::new(e.class(), e.to_string());
                return Ok(records.iter().map(|r| (r.cord_uid.clone(), Err(failure.clone()))).collect());
            }
        };
        let mut decoded: HashMap<String, Result<AnalyzedPaper, DocFailure>> = HashMap::new();
        match parse_job_results(&job, records) {
            Ok(results) => {
                for (id, r) in results {
                    decoded.insert(id, r.map_err(|e| DocFailure::new("parse", e.to_string())));
                }
            }
            Err(e) => {
                let failure = DocFailure::new("protocol", e.to_string());
                return Ok(records.iter().map(|r| (r.cord_uid.clone(), Err(failure.clone()))).collect());
            }
        }
        for err in job_document_errors(&job) {
            decoded.entry(err.id).or_insert_with(|| Err(DocFailure::new("document", err.message)));
        }
        Ok(records
            .iter()
            .map(|r| {
                let outcome = decoded
                    .remove(&r.cord_uid)
                    .unwrap_or_else(|| Err(DocFailure::new("missing", "job result has no document for this id")));
                (r.cord_uid.clone(), outcome)
            })
            .collect())
    }
}
