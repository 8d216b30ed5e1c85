//! The hierarchical paper/entity/relation document.
//!
//! [`AnalyzedPaper`] is what the pipeline stores and what the query engine
//! scans. Its stored JSON form ([`AnalyzedPaper::to_document`]) reuses the
//! service wire names for entities (`confidenceScore`, `isNegated`, ...) and
//! denormalizes each relation endpoint into a copy of the referenced
//! entity, so queries can read `r.source.text` directly.

use serde::{Deserialize, Serialize};

use super::category::EntityCategory;
use crate::corpus::PublishDate;

pub const UMLS: &str = "UMLS";

/// An ontology reference attached to an entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityLink {
    #[serde(rename = "dataSource")]
    pub data_source: String,
    pub id: String,
}

impl EntityLink {
    pub fn new(data_source: impl Into<String>, id: impl Into<String>) -> Self {
        Self { data_source: data_source.into(), id: id.into() }
    }

    pub fn umls(id: impl Into<String>) -> Self {
        Self::new(UMLS, id)
    }
}

/// One extracted span. `offset` and `length` count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthEntity {
    pub offset: usize,
    pub length: usize,
    pub text: String,
    pub category: EntityCategory,
    #[serde(rename = "confidenceScore")]
    pub confidence: f64,
    #[serde(rename = "isNegated")]
    pub is_negated: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<EntityLink>,
}

impl HealthEntity {
    pub fn end(&self) -> usize {
        self.offset + self.length
    }

    /// Id of the first link whose data source is UMLS.
    pub fn umls_id(&self) -> Option<&str> {
        self.links.iter().find(|l| l.data_source == UMLS).map(|l| l.id.as_str())
    }
}

/// A typed edge between two entities of the same paper.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HealthRelation {
    pub relation_type: String,
    pub bidirectional: bool,
    pub source: usize,
    pub target: usize,
}

pub const ABBREVIATION: &str = "Abbreviation";

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedPaper {
    pub id: String,
    pub title: String,
    pub publish_time: Option<PublishDate>,
    pub entities: Vec<HealthEntity>,
    pub relations: Vec<HealthRelation>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("document id is empty")]
    EmptyId,
    #[error("entity {0} has confidence outside [0, 1]")]
    Confidence(usize),
    #[error("entity {0} has a link with an empty field")]
    EmptyLink(usize),
    #[error("entities are not sorted by offset at index {0}")]
    Unsorted(usize),
    #[error("relation {0} references an entity out of range")]
    RelationRange(usize),
    #[error("relation {0} links an entity to itself")]
    SelfRelation(usize),
}

impl AnalyzedPaper {
    pub fn new(id: impl Into<String>, title: impl Into<String>, publish_time: Option<PublishDate>) -> Self {
        Self { id: id.into(), title: title.into(), publish_time, entities: Vec::new(), relations: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.id.is_empty() {
            return Err(ValidationError::EmptyId);
        }
        for (i, e) in self.entities.iter().enumerate() {
            if !(0.0..=1.0).contains(&e.confidence) {
                return Err(ValidationError::Confidence(i));
            }
            if e.links.iter().any(|l| l.data_source.is_empty() || l.id.is_empty()) {
                return Err(ValidationError::EmptyLink(i));
            }
            if i > 0 && self.entities[i - 1].offset > e.offset {
                return Err(ValidationError::Unsorted(i));
            }
        }
        let n = self.entities.len();
        for (i, r) in self.relations.iter().enumerate() {
            if r.source >= n || r.target >= n {
                return Err(ValidationError::RelationRange(i));
            }
            if r.source == r.target {
                return Err(ValidationError::SelfRelation(i));
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> StoredPaper {
        let endpoint = |index: usize| StoredEndpoint { index, entity: self.entities[index].clone() };
        StoredPaper {
            id: self.id.clone(),
            title: self.title.clone(),
            publish_time: self.publish_time,
            entities: self.entities.clone(),
            relations: self
                .relations
                .iter()
                .map(|r| StoredRelation {
                    relation_type: r.relation_type.clone(),
                    bidirectional: r.bidirectional,
                    source: endpoint(r.source),
                    target: endpoint(r.target),
                })
                .collect(),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("stored paper serializes")
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_document()).expect("stored paper serializes")
    }

    pub fn from_json_str(line: &str) -> Result<Self, DocumentError> {
        let stored: StoredPaper = serde_json::from_str(line)?;
        let paper = stored.into_paper();
        paper.validate()?;
        Ok(paper)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed document JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid document: {0}")]
    Invalid(#[from] ValidationError),
}

/// Stored JSON shape of an [`AnalyzedPaper`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredPaper {
    pub id: String,
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publish_time: Option<PublishDate>,
    #[serde(default)]
    pub entities: Vec<HealthEntity>,
    #[serde(default)]
    pub relations: Vec<StoredRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRelation {
    #[serde(rename = "relationType")]
    pub relation_type: String,
    pub bidirectional: bool,
    pub source: StoredEndpoint,
    pub target: StoredEndpoint,
}

/// A relation endpoint: the entity's index plus a copy of its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEndpoint {
    pub index: usize,
    #[serde(flatten)]
    pub entity: HealthEntity,
}

impl StoredPaper {
    pub fn into_paper(self) -> AnalyzedPaper {
        AnalyzedPaper {
            id: self.id,
            title: self.title,
            publish_time: self.publish_time,
            entities: self.entities,
            relations: self
                .relations
                .into_iter()
                .map(|r| HealthRelation {
                    relation_type: r.relation_type,
                    bidirectional: r.bidirectional,
                    source: r.source.index,
                    target: r.target.index,
                })
                .collect(),
        }
    }
}
