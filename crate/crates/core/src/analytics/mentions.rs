use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::corpus::PublishDate;
use crate::ner::{AnalyzedPaper, EntityCategory, HealthEntity};

/// One entity occurrence with the fields the aggregations need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MentionRecord {
    pub paper_id: String,
    pub text: String,
    pub is_negated: bool,
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub publish_time: Option<PublishDate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub umls_id: Option<String>,
}

impl MentionRecord {
    pub fn key(&self) -> String {
        term_key(self.umls_id.as_deref(), &self.text)
    }
}

/// Lowercase with runs of whitespace collapsed to one space.
pub fn fold_surface(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

pub const TEXT_KEY_PREFIX: &str = "text:";

/// Term identity: the UMLS id when present, else `text:<folded surface>`.
pub fn term_key(umls_id: Option<&str>, text: &str) -> String {
    match umls_id {
        Some(id) if !id.is_empty() => id.to_string(),
        _ => format!("{TEXT_KEY_PREFIX}{}", fold_surface(text)),
    }
}

pub fn entity_key(e: &HealthEntity) -> String {
    term_key(e.umls_id(), &e.text)
}

/// Every entity of `category` (or of any category when `None`), in
/// paper order then entity order.
pub fn extract_mentions<'a, I>(papers: I, category: Option<&EntityCategory>) -> Vec<MentionRecord>
where
    I: IntoIterator<Item = &'a AnalyzedPaper>,
{
    let mut out = Vec::new();
    for p in papers {
        for e in &p.entities {
            if category.is_some_and(|c| *c != e.category) {
                continue;
            }
            out.push(MentionRecord {
                paper_id: p.id.clone(),
                text: e.text.clone(),
                is_negated: e.is_negated,
                title: p.title.clone(),
                publish_time: p.publish_time,
                umls_id: e.umls_id().filter(|id| !id.is_empty()).map(str::to_string),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OntologyTermStats {
    pub key: String,
    pub name: String,
    pub mention_count: u64,
    pub negated_count: u64,
    pub negativity: f64,
    /// Distinct original-case surface forms, in first-seen order.
    pub surfaces: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RollupOptions {
    /// Discard mentions without a UMLS id instead of grouping them by
    /// folded surface.
    pub drop_unlinked: bool,
}

/// Groups mentions by term key. Sorted by mention count descending, then
/// key ascending.
pub fn rollup(mentions: &[MentionRecord], opts: RollupOptions) -> Vec<OntologyTermStats> {
    struct Group {
        mentions: u64,
        negated: u64,
        // surface -> (count, first index)
        surfaces: HashMap<String, (u64, usize)>,
        order: Vec<String>,
    }
    let mut groups: BTreeMap<String, Group> = BTreeMap::new();
    for m in mentions {
        if opts.drop_unlinked && m.umls_id.is_none() {
            continue;
        }
        let g = groups.entry(m.key()).or_insert_with(|| Group { mentions: 0, negated: 0, surfaces: HashMap::new(), order: Vec::new() });
        g.mentions += 1;
        g.negated += u64::from(m.is_negated);
        let next = g.order.len();
        let slot = g.surfaces.entry(m.text.clone()).or_insert((0, next));
        if slot.1 == next {
            g.order.push(m.text.clone());
        }
        slot.0 += 1;
    }
    let mut out: Vec<OntologyTermStats> = groups
        .into_iter()
        .map(|(key, g)| {
            let name = g
                .order
                .iter()
                .max_by(|a, b| {
                    let (ca, ia) = g.surfaces[*a];
                    let (cb, ib) = g.surfaces[*b];
                    ca.cmp(&cb).then(ib.cmp(&ia))
                })
                .cloned()
                .unwrap_or_default();
            OntologyTermStats {
                key,
                name,
                mention_count: g.mentions,
                negated_count: g.negated,
                negativity: g.negated as f64 / g.mentions as f64,
                surfaces: g.order,
            }
        })
        .collect();
    out.sort_by(|a, b| b.mention_count.cmp(&a.mention_count).then_with(|| a.key.cmp(&b.key)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryCount {
    pub category: String,
    pub count: u64,
}

/// Entity counts per category, sorted by category name.
pub fn category_counts(papers: &[AnalyzedPaper]) -> Vec<CategoryCount> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for e in papers.iter().flat_map(|p| &p.entities) {
        *counts.entry(e.category.as_str().to_string()).or_default() += 1;
    }
    counts.into_iter().map(|(category, count)| CategoryCount { category, count }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SurfaceCount {
    pub text: String,
    pub count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub umls_id: Option<String>,
}

/// Exact surface forms of one category with counts and the first UMLS id
/// seen for each. Sorted by count descending, then text.
pub fn surface_counts(papers: &[AnalyzedPaper], category: &EntityCategory) -> Vec<SurfaceCount> {
    let mut rows: BTreeMap<&str, SurfaceCount> = BTreeMap::new();
    for e in papers.iter().flat_map(|p| &p.entities).filter(|e| e.category == *category) {
        let row = rows.entry(&e.text).or_insert_with(|| SurfaceCount { text: e.text.clone(), count: 0, umls_id: None });
        row.count += 1;
        if row.umls_id.is_none() {
            row.umls_id = e.umls_id().filter(|id| !id.is_empty()).map(str::to_string);
        }
    }
    let mut out: Vec<SurfaceCount> = rows.into_values().collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.text.cmp(&b.text)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PaperRef {
    pub id: String,
    pub title: String,
    pub publish_time: Option<PublishDate>,
}

/// Papers with at least one entity whose term key is `key`; newest first,
/// undated last, ties by id.
pub fn papers_with_term(papers: &[AnalyzedPaper], key: &str) -> Vec<PaperRef> {
    let mut out: Vec<PaperRef> = papers
        .iter()
        .filter(|p| p.entities.iter().any(|e| entity_key(e) == key))
        .map(|p| PaperRef { id: p.id.clone(), title: p.title.clone(), publish_time: p.publish_time })
        .collect();
    out.sort_by(|a, b| match (&a.publish_time, &b.publish_time) {
        (Some(x), Some(y)) => y.cmp(x).then_with(|| a.id.cmp(&b.id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.id.cmp(&b.id),
    });
    out
}
