//! An in-process stand-in for the hosted health entity job service.
//!
//! Submissions are analyzed with the local extractor. Status polls follow
//! a script (by default one `running` reply, then `succeeded`); submissions
//! can be scripted to fail with HTTP errors first.

use std::collections::{HashMap, HashSet, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use cordscope::ner::remote::{JOBS_PATH, KEY_HEADER, MAX_BATCH};
use cordscope::ner::wire::DocumentFailure;
use cordscope::ner::{serialize_results, AnalyzedPaper, LocalExtractor};

use crate::runtime::{spawn, Running};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PollReply {
    NotStarted,
    Running,
    Succeeded,
    Failed(String),
    /// An HTTP error status with an error body.
    Http(u16),
}

#[derive(Clone)]
pub struct MockConfig {
    pub key: String,
    /// Replies to a job's status polls, in order; once exhausted the job
    /// has succeeded.
    pub poll_script: Vec<PollReply>,
    /// HTTP statuses returned to the first submissions.
    pub submit_failures: Vec<u16>,
    /// Sent as `Retry-After` with scripted HTTP errors.
    pub retry_after_secs: Option<u64>,
    /// Ids reported as per-document errors.
    pub reject_ids: HashSet<String>,
    pub extractor: Arc<LocalExtractor>,
}

impl MockConfig {
    pub fn new(key: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            poll_script: vec![PollReply::Running],
            submit_failures: Vec::new(),
            retry_after_secs: None,
            reject_ids: HashSet::new(),
            extractor: Arc::new(LocalExtractor::bundled()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Counters {
    pub submits: usize,
    pub accepted_jobs: usize,
    pub polls: usize,
    pub unauthorized: usize,
}

struct Job {
    script: VecDeque<PollReply>,
    polls: usize,
    results: Value,
}

struct Inner {
    config: MockConfig,
    base: String,
    submit_failures: VecDeque<u16>,
    jobs: HashMap<String, Job>,
    next_job: u64,
    counters: Counters,
}

#[derive(Clone)]
pub struct MockTa {
    inner: Arc<Mutex<Inner>>,
}

impl MockTa {
    pub fn new(config: MockConfig, base: impl Into<String>) -> Self {
        let submit_failures = config.submit_failures.iter().copied().collect();
        Self {
            inner: Arc::new(Mutex::new(Inner {
                config,
                base: base.into(),
                submit_failures,
                jobs: HashMap::new(),
                next_job: 1,
                counters: Counters::default(),
            })),
        }
    }

    pub fn router(&self) -> Router {
        Router::new().route(JOBS_PATH, post(submit)).route(&format!("{JOBS_PATH}/{{id}}"), get(status)).with_state(self.clone())
    }

    pub fn counters(&self) -> Counters {
        self.inner.lock().expect("mock lock").counters.clone()
    }

    /// Polls received by one job, by id.
    pub fn job_polls(&self, id: &str) -> Option<usize> {
        self.inner.lock().expect("mock lock").jobs.get(id).map(|j| j.polls)
    }
}

/// A mock service listening on `addr` (port 0 picks a free port).
pub struct MockServer {
    pub mock: MockTa,
    running: Running,
}

impl MockServer {
    pub fn spawn(config: MockConfig, addr: SocketAddr) -> std::io::Result<Self> {
        let mock = MockTa::new(config, "");
        let for_router = mock.clone();
        let running = spawn(addr, move |bound| {
            for_router.inner.lock().expect("mock lock").base = format!("http://{bound}");
            for_router.router()
        })?;
        Ok(Self { mock, running })
    }

    pub fn url(&self) -> String {
        self.running.url()
    }

    pub fn counters(&self) -> Counters {
        self.mock.counters()
    }

    pub fn stop(self) -> std::io::Result<()> {
        self.running.stop()
    }
}

fn error_body(status: StatusCode, code: &str, message: &str, retry_after: Option<u64>) -> Response {
    let mut response = (status, Json(json!({ "error": { "code": code, "message": message } }))).into_response();
    if let Some(secs) = retry_after {
        if let Ok(v) = secs.to_string().parse() {
            response.headers_mut().insert("retry-after", v);
        }
    }
    response
}

fn authorized(inner: &mut Inner, headers: &HeaderMap) -> bool {
    let ok = headers.get(KEY_HEADER).and_then(|v| v.to_str().ok()) == Some(inner.config.key.as_str());
    if !ok {
        inner.counters.unauthorized += 1;
    }
    ok
}

fn unauthorized() -> Response {
    error_body(StatusCode::UNAUTHORIZED, "401", "Access denied due to invalid subscription key.", None)
}

#[derive(Deserialize)]
struct SubmitDoc {
    id: String,
    text: String,
}

#[derive(Deserialize)]
struct SubmitBody {
    documents: Vec<SubmitDoc>,
}

async fn submit(State(mock): State<MockTa>, headers: HeaderMap, body: axum::body::Bytes) -> Response {
    let mut inner = mock.inner.lock().expect("mock lock");
    inner.counters.submits += 1;
    if !authorized(&mut inner, &headers) {
        return unauthorized();
    }
    if let Some(code) = inner.submit_failures.pop_front() {
        let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        return error_body(status, "InternalServerError", "scripted failure", inner.config.retry_after_secs);
    }
    let body: SubmitBody = match serde_json::from_slice(&body) {
        Ok(b) => b,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, "InvalidRequest", &e.to_string(), None),
    };
    if body.documents.is_empty() || body.documents.len() > MAX_BATCH {
        return error_body(StatusCode::BAD_REQUEST, "InvalidDocumentBatch", "batch must hold 1 to 10 documents", None);
    }
    let mut papers = Vec::new();
    let mut errors = Vec::new();
    for doc in &body.documents {
        if inner.config.reject_ids.contains(&doc.id) {
            errors.push(DocumentFailure { id: doc.id.clone(), message: "document rejected".into() });
            continue;
        }
        let mut paper = AnalyzedPaper::new(doc.id.clone(), String::new(), None);
        let (entities, relations) = inner.config.extractor.analyze(&doc.text);
        paper.entities = entities;
        paper.relations = relations;
        papers.push(paper);
    }
    let id = format!("job-{:04}", inner.next_job);
    inner.next_job += 1;
    inner.counters.accepted_jobs += 1;
    let job = Job { script: inner.config.poll_script.iter().cloned().collect(), polls: 0, results: serialize_results(&papers, &errors) };
    inner.jobs.insert(id.clone(), job);
    let location = format!("{}{JOBS_PATH}/{id}", inner.base);
    let mut response = StatusCode::ACCEPTED.into_response();
    if let Ok(v) = location.parse() {
        response.headers_mut().insert("operation-location", v);
    }
    response
}

async fn status(State(mock): State<MockTa>, Path(id): Path<String>, headers: HeaderMap) -> Response {
    let mut inner = mock.inner.lock().expect("mock lock");
    inner.counters.polls += 1;
    if !authorized(&mut inner, &headers) {
        return unauthorized();
    }
    let retry_after = inner.config.retry_after_secs;
    let Some(job) = inner.jobs.get_mut(&id) else {
        return error_body(StatusCode::NOT_FOUND, "NotFound", "no such job", None);
    };
    job.polls += 1;
    let reply = job.script.pop_front().unwrap_or(PollReply::Succeeded);
    let envelope = |status: &str| json!({ "jobId": id, "status": status, "createdDateTime": "2020-01-01T00:00:00Z", "lastUpdateDateTime": "2020-01-01T00:00:00Z" });
    match reply {
        PollReply::NotStarted => Json(envelope("notStarted")).into_response(),
        PollReply::Running => Json(envelope("running")).into_response(),
        PollReply::Succeeded => {
            let mut body = envelope("succeeded");
            body["results"] = job.results.clone();
            Json(body).into_response()
        }
        PollReply::Failed(message) => {
            let mut body = envelope("failed");
            body["errors"] = json!([{ "code": "InternalServerError", "message": message }]);
            Json(body).into_response()
        }
        PollReply::Http(code) => {
            let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            error_body(status, "InternalServerError", "scripted failure", retry_after)
        }
    }
}
