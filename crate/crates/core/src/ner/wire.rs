//! Health entity service result JSON.
//!
//! A result document looks like
//!
//! ```json
//! { "id": "jkk62qn0z",
//!   "entities": [ { "offset": 24, "length": 28, "text": "...", "category": "Diagnosis",
//!                   "confidenceScore": 0.98, "isNegated": false,
//!                   "links": [ { "dataSource": "UMLS", "id": "C5203670" } ] } ],
//!   "relations": [ { "relationType": "Abbreviation", "bidirectional": true,
//!                    "source": "#/results/documents/2/entities/6",
//!                    "target": "#/results/documents/2/entities/7" } ] }
//! ```
//!
//! Documents arrive either bare or inside a job envelope
//! (`{"status": ..., "results": {"documents": [...]}}`).

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::category::EntityCategory;
use super::model::{AnalyzedPaper, EntityLink, HealthEntity, HealthRelation};
use crate::corpus::PaperRecord;

pub const MODEL_VERSION: &str = "v3.1";

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("malformed result JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("result JSON has neither `entities` nor `results.documents`")]
    Shape,
    #[error("no result document for id `{0}`")]
    MissingDocument(String),
    #[error("document `{id}`: malformed entity pointer `{pointer}`")]
    Pointer { id: String, pointer: String },
    #[error("document `{id}`: invalid relation: {reason}")]
    Relation { id: String, reason: String },
}

#[derive(Debug, Deserialize)]
struct WireEntity {
    offset: usize,
    length: usize,
    text: String,
    category: EntityCategory,
    #[serde(rename = "confidenceScore", default = "one")]
    confidence: f64,
    #[serde(rename = "isNegated")]
    is_negated: Option<bool>,
    #[serde(default)]
    assertion: Option<Assertion>,
    #[serde(default)]
    links: Vec<EntityLink>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
struct Assertion {
    certainty: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct WireRelation {
    #[serde(rename = "relationType")]
    relation_type: String,
    #[serde(default)]
    bidirectional: bool,
    source: String,
    target: String,
}

#[derive(Debug, Deserialize)]
struct WireDocument {
    id: String,
    #[serde(default)]
    entities: Vec<WireEntity>,
    #[serde(default)]
    relations: Vec<WireRelation>,
}

/// A document-level error reported inside a job result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentFailure {
    pub id: String,
    pub message: String,
}

pub fn entity_pointer(doc: usize, entity: usize) -> String {
    format!("#/results/documents/{doc}/entities/{entity}")
}

/// Splits `#/results/documents/{d}/entities/{e}` into `(d, e)`.
pub fn parse_pointer(pointer: &str) -> Option<(usize, usize)> {
    let rest = pointer.strip_prefix("#/results/documents/")?;
    let (doc, rest) = rest.split_once('/')?;
    let entity = rest.strip_prefix("entities/")?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(doc) || !digits(entity) {
        return None;
    }
    Some((doc.parse().ok()?, entity.parse().ok()?))
}

fn decode_document(doc: WireDocument, position: Option<usize>, meta: &PaperRecord) -> Result<AnalyzedPaper, WireError> {
    let n = doc.entities.len();
    let mut entities: Vec<HealthEntity> = doc
        .entities
        .into_iter()
        .map(|e| {
            let negated_by_assertion =
                e.assertion.and_then(|a| a.certainty).is_some_and(|c| c.to_ascii_lowercase().starts_with("negative"));
            HealthEntity {
                offset: e.offset,
                length: e.length,
                text: e.text,
                category: e.category,
                confidence: e.confidence.clamp(0.0, 1.0),
                is_negated: e.is_negated.unwrap_or(negated_by_assertion),
                links: e.links.into_iter().filter(|l| !l.data_source.is_empty() && !l.id.is_empty()).collect(),
            }
        })
        .collect();

    let resolve = |pointer: &str| -> Result<usize, WireError> {
        let bad = || WireError::Pointer { id: doc.id.clone(), pointer: pointer.to_string() };
        let (d, e) = parse_pointer(pointer).ok_or_else(bad)?;
        if position.is_some_and(|p| p != d) || e >= n {
            return Err(bad());
        }
        Ok(e)
    };
    let mut relations = Vec::with_capacity(doc.relations.len());
    for r in &doc.relations {
        let source = resolve(&r.source)?;
        let target = resolve(&r.target)?;
        if source == target {
            return Err(WireError::Relation { id: doc.id.clone(), reason: "source equals target".into() });
        }
        relations.push(HealthRelation { relation_type: r.relation_type.clone(), bidirectional: r.bidirectional, source, target });
    }

    if !meta.abstract_text.is_empty() {
        reconcile_offsets(&mut entities, &meta.abstract_text);
    }

    // stable sort by offset, remapping relation endpoints
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| entities[i].offset);
    if order.iter().enumerate().any(|(new, &old)| new != old) {
        let mut new_index = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let mut slots: Vec<Option<HealthEntity>> = entities.into_iter().map(Some).collect();
        entities = order.iter().map(|&old| slots[old].take().expect("permutation")).collect();
        for r in &mut relations {
            r.source = new_index[r.source];
            r.target = new_index[r.target];
        }
    }

    Ok(AnalyzedPaper {
        id: if meta.cord_uid.is_empty() { doc.id } else { meta.cord_uid.clone() },
        title: meta.title.clone(),
        publish_time: meta.publish_time,
        entities,
        relations,
    })
}

/// Re-anchors entity offsets to Unicode scalar positions in `source`.
///
/// When the text at an entity's offset differs from its `text` (the service
/// counted in another unit), the occurrence of `text` nearest to the
/// reported offset is used instead. Entities whose text can't be found are
/// left unchanged.
pub fn reconcile_offsets(entities: &mut [HealthEntity], source: &str) {
    let chars: Vec<char> = source.chars().collect();
    for e in entities.iter_mut() {
        let wanted: Vec<char> = e.text.chars().collect();
        let matches_at = |pos: usize| chars.get(pos..pos + wanted.len()).is_some_and(|s| s == wanted.as_slice());
        if matches_at(e.offset) {
            e.length = wanted.len();
            continue;
        }
        if wanted.is_empty() || wanted.len() > chars.len() {
            continue;
        }
        let best = (0..=chars.len() - wanted.len()).filter(|&p| matches_at(p)).min_by_key(|&p| p.abs_diff(e.offset));
        if let Some(p) = best {
            e.offset = p;
            e.length = wanted.len();
        }
    }
}

/// Decodes the result for one paper, merging title and date from `meta`.
///
/// `raw` may be a bare document or a job envelope; in an envelope the
/// document whose id equals `meta.cord_uid` is selected and relation
/// pointers must name its position.
pub fn parse_result_json(raw: &[u8], meta: &PaperRecord) -> Result<AnalyzedPaper, WireError> {
    let value: Value = serde_json::from_slice(raw)?;
    parse_result_value(value, meta)
}

pub fn parse_result_value(value: Value, meta: &PaperRecord) -> Result<AnalyzedPaper, WireError> {
    if value.get("entities").is_some() || value.get("relations").is_some() {
        let doc: WireDocument = serde_json::from_value(value)?;
        return decode_document(doc, None, meta);
    }
    let documents = documents_of(&value).ok_or(WireError::Shape)?;
    let (position, found) = documents
        .iter()
        .enumerate()
        .find(|(_, d)| d.get("id").and_then(Value::as_str) == Some(meta.cord_uid.as_str()))
        .ok_or_else(|| WireError::MissingDocument(meta.cord_uid.clone()))?;
    let doc: WireDocument = serde_json::from_value(found.clone())?;
    decode_document(doc, Some(position), meta)
}

fn documents_of(value: &Value) -> Option<&Vec<Value>> {
    value.get("results").and_then(|r| r.get("documents")).or_else(|| value.get("documents")).and_then(Value::as_array)
}

/// Per-document decoding outcomes, keyed by id.
pub type DecodedDocuments = Vec<(String, Result<AnalyzedPaper, WireError>)>;

/// Decodes every document of a job result; `metas` supplies the paper
/// metadata by id. Service-reported document errors are returned as
/// failures alongside decoding failures.
pub fn parse_job_results(value: &Value, metas: &[&PaperRecord]) -> Result<DecodedDocuments, WireError> {
    let documents = documents_of(value).ok_or(WireError::Shape)?;
    let mut out = Vec::new();
    for (position, raw) in documents.iter().enumerate() {
        let id = raw.get("id").and_then(Value::as_str).unwrap_or_default().to_string();
        let Some(meta) = metas.iter().find(|m| m.cord_uid == id) else {
            continue;
        };
        let decoded = serde_json::from_value::<WireDocument>(raw.clone())
            .map_err(WireError::from)
            .and_then(|doc| decode_document(doc, Some(position), meta));
        out.push((id, decoded));
    }
    Ok(out)
}

/// Service-reported document errors (`results.errors[]`).
pub fn job_document_errors(value: &Value) -> Vec<DocumentFailure> {
    value
        .get("results")
        .and_then(|r| r.get("errors"))
        .and_then(Value::as_array)
        .map(|errors| {
            errors
                .iter()
                .map(|e| DocumentFailure {
                    id: e.get("id").and_then(Value::as_str).unwrap_or_default().to_string(),
                    message: e
                        .pointer("/error/message")
                        .or_else(|| e.get("message"))
                        .and_then(Value::as_str)
                        .unwrap_or("document error")
                        .to_string(),
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Serializes one paper as a result document at batch position `position`.
pub fn serialize_result_json(paper: &AnalyzedPaper, position: usize) -> Value {
    let relations: Vec<Value> = paper
        .relations
        .iter()
        .map(|r| {
            serde_json::to_value(WireRelation {
                relation_type: r.relation_type.clone(),
                bidirectional: r.bidirectional,
                source: entity_pointer(position, r.source),
                target: entity_pointer(position, r.target),
            })
            .expect("relation serializes")
        })
        .collect();
    json!({
        "id": paper.id,
        "entities": paper.entities,
        "relations": relations,
    })
}

/// The `results` object of a succeeded job.
pub fn serialize_results(papers: &[AnalyzedPaper], errors: &[DocumentFailure]) -> Value {
    let documents: Vec<Value> = papers.iter().enumerate().map(|(i, p)| serialize_result_json(p, i)).collect();
    let errors: Vec<Value> =
        errors.iter().map(|e| json!({ "id": e.id, "error": { "code": "InvalidDocument", "message": e.message } })).collect();
    json!({ "documents": documents, "errors": errors, "modelVersion": MODEL_VERSION })
}
