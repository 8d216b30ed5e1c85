//! Client for the hosted health entity job protocol.
//!
//! `POST {endpoint}/text/analytics/v3.1/entities/health/jobs?model-version=v3.1`
//! with an `Ocp-Apim-Subscription-Key` header starts a job; the
//! `operation-location` response header names the job resource, which is
//! polled with `GET` until its `status` is `succeeded` or `failed`.

use std::sync::Arc;
use std::time::Duration;

use reqwest::blocking::{Client, Response};
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::Value;

use super::retry::{with_retry, Clock, RetryError, RetryPolicy, Retryable, SystemClock};

pub const JOBS_PATH: &str = "/text/analytics/v3.1/entities/health/jobs";
pub const MODEL_QUERY: &str = "model-version=v3.1";
pub const KEY_HEADER: &str = "Ocp-Apim-Subscription-Key";
pub const MAX_BATCH: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct RemoteDocument {
    pub id: String,
    pub language: String,
    pub text: String,
}

impl RemoteDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self { id: id.into(), language: "en".into(), text: text.into() }
    }
}

#[derive(Debug, Serialize)]
struct SubmitBody<'a> {
    documents: &'a [RemoteDocument],
}

/// Opaque reference to a submitted job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JobHandle {
    operation_location: String,
}

impl JobHandle {
    pub fn operation_location(&self) -> &str {
        &self.operation_location
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RemoteError {
    #[error("invalid request: {0}")]
    Precondition(String),
    #[error("authentication rejected by {endpoint}")]
    Auth { endpoint: String },
    #[error("service unavailable (HTTP {status}): {message}")]
    Unavailable { status: u16, retry_after: Option<Duration>, message: String },
    #[error("request failed (HTTP {status}): {message}")]
    Http { status: u16, message: String },
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("job still running")]
    StillRunning,
    #[error("job failed: {0}")]
    JobFailed(String),
    #[error("job did not finish within {attempts} polls")]
    Timeout { attempts: u32, last: Box<RemoteError> },
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl Retryable for RemoteError {
    fn is_retryable(&self) -> bool {
        matches!(self, RemoteError::Unavailable { .. } | RemoteError::Transport { .. } | RemoteError::StillRunning)
    }

    fn retry_after(&self) -> Option<Duration> {
        match self {
            RemoteError::Unavailable { retry_after, .. } => *retry_after,
            _ => None,
        }
    }
}

impl RemoteError {
    /// Auth and precondition errors abort a whole run; everything else is
    /// scoped to the batch being processed.
    pub fn is_fatal_for_run(&self) -> bool {
        matches!(self, RemoteError::Auth { .. } | RemoteError::Precondition(_))
    }

    pub fn class(&self) -> &'static str {
        match self {
            RemoteError::Precondition(_) => "precondition",
            RemoteError::Auth { .. } => "auth",
            RemoteError::Unavailable { .. } => "unavailable",
            RemoteError::Http { .. } => "http",
            RemoteError::Transport { .. } => "transport",
            RemoteError::StillRunning => "running",
            RemoteError::JobFailed(_) => "job-failed",
            RemoteError::Timeout { .. } => "timeout",
            RemoteError::Protocol(_) => "protocol",
        }
    }
}

/// Strips query strings and any occurrence of the key from a URL for display.
pub fn redact(url: &str, key: &str) -> String {
    let base = url.split(['?', '#']).next().unwrap_or(url);
    if key.is_empty() {
        base.to_string()
    } else {
        base.replace(key, "***")
    }
}

#[derive(Clone)]
pub struct TextAnalyticsClient {
    http: Client,
    endpoint: String,
    key: String,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for TextAnalyticsClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TextAnalyticsClient").field("endpoint", &redact(&self.endpoint, &self.key)).finish()
    }
}

impl TextAnalyticsClient {
    pub fn new(endpoint: impl Into<String>, key: impl Into<String>) -> Result<Self, RemoteError> {
        Self::with_clock(endpoint, key, Arc::new(SystemClock))
    }

    pub fn with_clock(endpoint: impl Into<String>, key: impl Into<String>, clock: Arc<dyn Clock>) -> Result<Self, RemoteError> {
        let endpoint = endpoint.into().trim_end_matches('/').to_string();
        if endpoint.is_empty() {
            return Err(RemoteError::Precondition("endpoint is empty".into()));
        }
        let http = Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| RemoteError::Precondition(format!("building HTTP client: {e}")))?;
        Ok(Self { http, endpoint, key: key.into(), clock })
    }

    /// Reads `TA_ENDPOINT` and `TA_KEY`.
    pub fn from_env() -> Result<Self, RemoteError> {
        let endpoint = std::env::var("TA_ENDPOINT").map_err(|_| RemoteError::Precondition("TA_ENDPOINT is not set".into()))?;
        let key = std::env::var("TA_KEY").map_err(|_| RemoteError::Precondition("TA_KEY is not set".into()))?;
        Self::new(endpoint, key)
    }

    pub fn jobs_url(&self) -> String {
        format!("{}{JOBS_PATH}?{MODEL_QUERY}", self.endpoint)
    }

    fn display_endpoint(&self) -> String {
        redact(&self.endpoint, &self.key)
    }

    fn transport(&self, e: reqwest::Error) -> RemoteError {
        RemoteError::Transport { endpoint: self.display_endpoint(), message: redact(&e.to_string(), &self.key) }
    }

    fn classify(&self, response: Response) -> Result<Response, RemoteError> {
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let retry_after = response
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let message = response
            .json::<Value>()
            .ok()
            .and_then(|v| v.pointer("/error/message").or_else(|| v.get("message")).and_then(Value::as_str).map(str::to_string))
            .unwrap_or_else(|| status.canonical_reason().unwrap_or("error").to_string());
        Err(match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => RemoteError::Auth { endpoint: self.display_endpoint() },
            StatusCode::TOO_MANY_REQUESTS => RemoteError::Unavailable { status: status.as_u16(), retry_after, message },
            s if s.is_server_error() => RemoteError::Unavailable { status: s.as_u16(), retry_after, message },
            s => RemoteError::Http { status: s.as_u16(), message },
        })
    }

    /// Starts a job for up to [`MAX_BATCH`] documents. One HTTP request.
    pub fn submit(&self, documents: &[RemoteDocument]) -> Result<JobHandle, RemoteError> {
        if documents.is_empty() {
            return Err(RemoteError::Precondition("empty batch".into()));
        }
        if documents.len() > MAX_BATCH {
            return Err(RemoteError::Precondition(format!("batch of {} exceeds {MAX_BATCH}", documents.len())));
        }
        if let Some(d) = documents.iter().find(|d| d.id.is_empty() || d.text.trim().is_empty()) {
            return Err(RemoteError::Precondition(format!("document `{}` has an empty id or text", d.id)));
        }
        let response = self
            .http
            .post(self.jobs_url())
            .header(KEY_HEADER, &self.key)
            .json(&SubmitBody { documents })
            .send()
            .map_err(|e| self.transport(e))?;
        let response = self.classify(response)?;
        let location = response
            .headers()
            .get("operation-location")
            .and_then(|v| v.to_str().ok())
            .ok_or_else(|| RemoteError::Protocol("response has no operation-location header".into()))?;
        Ok(JobHandle { operation_location: location.to_string() })
    }

    pub fn submit_with_retry(&self, documents: &[RemoteDocument], policy: &RetryPolicy) -> Result<JobHandle, RemoteError> {
        with_retry(policy, self.clock.as_ref(), |_| self.submit(documents)).map_err(|e| match e {
            RetryError::Fatal(e) => e,
            RetryError::Exhausted { last, .. } => last,
        })
    }

    /// One status request.
    pub fn job_status(&self, handle: &JobHandle) -> Result<Value, RemoteError> {
        let response = self.http.get(&handle.operation_location).header(KEY_HEADER, &self.key).send().map_err(|e| self.transport(e))?;
        let response = self.classify(response)?;
        response.json::<Value>().map_err(|e| RemoteError::Protocol(format!("job status is not JSON: {e}")))
    }

    /// Polls until the job succeeds (returning the whole job JSON) or fails.
    /// Every request, including ones answered with a retryable error,
    /// consumes one attempt of `policy`.
    pub fn poll_job(&self, handle: &JobHandle, policy: &RetryPolicy) -> Result<Value, RemoteError> {
        let outcome = with_retry(policy, self.clock.as_ref(), |_| {
            let job = self.job_status(handle)?;
            match job.get("status").and_then(Value::as_str) {
                Some("succeeded") => Ok(job),
                Some("failed") | Some("cancelled") | Some("canceled") => {
                    let message = job
                        .pointer("/errors/0/message")
                        .or_else(|| job.pointer("/error/message"))
                        .and_then(Value::as_str)
                        .unwrap_or("job failed")
                        .to_string();
                    Err(RemoteError::JobFailed(message))
                }
                Some("notStarted") | Some("running") | Some("cancelling") => Err(RemoteError::StillRunning),
                other => Err(RemoteError::Protocol(format!("unexpected job status {other:?}"))),
            }
        });
        outcome.map_err(|e| match e {
            RetryError::Fatal(e) => e,
            RetryError::Exhausted { attempts, last } => RemoteError::Timeout { attempts, last: Box::new(last) },
        })
    }
}
