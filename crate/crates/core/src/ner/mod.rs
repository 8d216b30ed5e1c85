//! Health entity extraction: the document model, a local gazetteer
//! extractor, and a client for the hosted job protocol.

pub mod category;
pub mod gazetteer;
pub mod local;
pub mod model;
pub mod negation;
pub mod remote;
pub mod retry;
pub mod wire;

pub use category::EntityCategory;
pub use gazetteer::{Gazetteer, GazetteerEntry, GazetteerError};
pub use local::{analyze_local, detect_abbreviations, LocalExtractor};
pub use model::{AnalyzedPaper, EntityLink, HealthEntity, HealthRelation, ABBREVIATION, UMLS};
pub use negation::{detect_negation, NegationConfig};
pub use remote::{JobHandle, RemoteDocument, RemoteError, TextAnalyticsClient};
pub use retry::{with_retry, Clock, RetryError, RetryPolicy, Retryable, SystemClock, VirtualClock};
pub use wire::{parse_result_json, serialize_result_json, serialize_results, WireError};
