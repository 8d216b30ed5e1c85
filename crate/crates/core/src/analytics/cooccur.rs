use std::collections::BTreeSet;

use serde::Serialize;

use crate::ner::{AnalyzedPaper, EntityCategory, HealthEntity};

use super::mentions::{extract_mentions, fold_surface, rollup, OntologyTermStats, RollupOptions};

/// A term as a co-occurrence axis: its key plus the folded surfaces that
/// identify unlinked mentions of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermSpec {
    pub key: String,
    pub label: String,
    pub surfaces: BTreeSet<String>,
    #[serde(skip)]
    pub category: Option<EntityCategory>,
}

impl TermSpec {
    pub fn new(key: &str, label: &str, surfaces: &[&str]) -> Self {
        Self { key: key.into(), label: label.into(), surfaces: surfaces.iter().map(|s| fold_surface(s)).collect(), category: None }
    }

    pub fn from_stats(stats: &OntologyTermStats, category: Option<EntityCategory>) -> Self {
        Self {
            key: stats.key.clone(),
            label: stats.name.clone(),
            surfaces: stats.surfaces.iter().map(|s| fold_surface(s)).collect(),
            category,
        }
    }

    /// Linked entities match on UMLS id; unlinked ones on folded surface.
    pub fn matches(&self, e: &HealthEntity) -> bool {
        if self.category.as_ref().is_some_and(|c| *c != e.category) {
            return false;
        }
        match e.umls_id().filter(|id| !id.is_empty()) {
            Some(id) => id == self.key,
            None => self.surfaces.contains(&fold_surface(&e.text)),
        }
    }
}

/// The `top` most-mentioned terms of a category.
pub fn top_terms(papers: &[AnalyzedPaper], category: &EntityCategory, top: usize, opts: RollupOptions) -> Vec<TermSpec> {
    rollup(&extract_mentions(papers, Some(category)), opts)
        .iter()
        .take(top)
        .map(|s| TermSpec::from_stats(s, Some(category.clone())))
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CountMode {
    /// A paper counts once per term pair.
    #[default]
    Binary,
    /// A paper contributes `count_i × count_j`.
    Multiplicity,
}

impl std::str::FromStr for CountMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "binary" => Ok(CountMode::Binary),
            "multiplicity" => Ok(CountMode::Multiplicity),
            other => Err(format!("unknown count mode `{other}` (expected binary or multiplicity)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CooccurrenceMatrix {
    pub row_terms: Vec<TermSpec>,
    pub col_terms: Vec<TermSpec>,
    pub counts: Vec<Vec<u64>>,
    /// Papers mentioning each row / column term.
    pub row_papers: Vec<u64>,
    pub col_papers: Vec<u64>,
    pub papers: u64,
}

impl CooccurrenceMatrix {
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.col_terms.len()).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    fn same_axes(&self) -> bool {
        self.row_terms.len() == self.col_terms.len() && self.row_terms.iter().zip(&self.col_terms).all(|(a, b)| a.key == b.key)
    }

    /// CSV with a `key,label` prefix per row and column keys as header.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = ["key", "label"].into_iter().chain(self.col_terms.iter().map(|t| t.key.as_str())).collect();
        let _ = w.write_record(&header);
        for (t, row) in self.row_terms.iter().zip(&self.counts) {
            let rec: Vec<String> = [t.key.clone(), t.label.clone()].into_iter().chain(row.iter().map(u64::to_string)).collect();
            let _ = w.write_record(&rec);
        }
        w.into_inner().unwrap_or_default()
    }
}

/// Per-paper term co-occurrence over the entities of each paper.
pub fn cooccurrence(papers: &[AnalyzedPaper], rows: &[TermSpec], cols: &[TermSpec], mode: CountMode) -> CooccurrenceMatrix {
    let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
    let mut row_papers = vec![0u64; rows.len()];
    let mut col_papers = vec![0u64; cols.len()];
    let hits = |terms: &[TermSpec], p: &AnalyzedPaper| -> Vec<u64> {
        terms.iter().map(|t| p.entities.iter().filter(|e| t.matches(e)).count() as u64).collect()
    };
    for p in papers {
        let r = hits(rows, p);
        let c = hits(cols, p);
        for (i, &ri) in r.iter().enumerate() {
            row_papers[i] += u64::from(ri > 0);
        }
        for (j, &cj) in c.iter().enumerate() {
            col_papers[j] += u64::from(cj > 0);
        }
        for (i, &ri) in r.iter().enumerate().filter(|(_, n)| **n > 0) {
            for (j, &cj) in c.iter().enumerate().filter(|(_, n)| **n > 0) {
                counts[i][j] += match mode {
                    CountMode::Binary => 1,
                    CountMode::Multiplicity => ri * cj,
                };
            }
        }
    }
    CooccurrenceMatrix { row_terms: rows.to_vec(), col_terms: cols.to_vec(), counts, row_papers, col_papers, papers: papers.len() as u64 }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SankeyNode {
    pub key: String,
    pub label: String,
    pub side: Side,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SankeyLink {
    /// Index into `nodes`.
    pub source: usize,
    pub target: usize,
    pub value: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct SankeyExport {
    pub nodes: Vec<SankeyNode>,
    pub links: Vec<SankeyLink>,
}

fn pick_top(terms: &[TermSpec], totals: &[u64], top: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..terms.len()).filter(|&i| totals[i] > 0).collect();
    idx.sort_by(|&a, &b| totals[b].cmp(&totals[a]).then_with(|| terms[a].key.cmp(&terms[b].key)));
    idx.truncate(top);
    idx
}

/// Rows become left (`source`) nodes and columns right (`target`) nodes.
/// Terms with no co-occurrence are left out.
pub fn sankey_export(m: &CooccurrenceMatrix, top: usize) -> SankeyExport {
    let rows = pick_top(&m.row_terms, &m.row_sums(), top);
    let cols = pick_top(&m.col_terms, &m.col_sums(), top);
    let (row_sums, col_sums) = (m.row_sums(), m.col_sums());
    let mut nodes: Vec<SankeyNode> = rows
        .iter()
        .map(|&i| SankeyNode {
            key: m.row_terms[i].key.clone(),
            label: m.row_terms[i].label.clone(),
            side: Side::Source,
            total: row_sums[i],
        })
        .collect();
    nodes.extend(cols.iter().map(|&j| SankeyNode {
        key: m.col_terms[j].key.clone(),
        label: m.col_terms[j].label.clone(),
        side: Side::Target,
        total: col_sums[j],
    }));
    let mut links = Vec::new();
    for (ri, &i) in rows.iter().enumerate() {
        for (ci, &j) in cols.iter().enumerate() {
            if m.counts[i][j] > 0 {
                links.push(SankeyLink { source: ri, target: rows.len() + ci, value: m.counts[i][j] });
            }
        }
    }
    links.sort_by(|a, b| {
        b.value
            .cmp(&a.value)
            .then_with(|| nodes[a.source].key.cmp(&nodes[b.source].key))
            .then_with(|| nodes[a.target].key.cmp(&nodes[b.target].key))
    });
    SankeyExport { nodes, links }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct ChordExport {
    pub keys: Vec<String>,
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("chord export needs identical row and column terms")]
pub struct NotSquare;

/// Same-category export: label order preserved, diagonal zeroed.
pub fn chord_export(m: &CooccurrenceMatrix) -> Result<ChordExport, NotSquare> {
    if !m.same_axes() {
        return Err(NotSquare);
    }
    let matrix =
        m.counts.iter().enumerate().map(|(i, row)| row.iter().enumerate().map(|(j, &v)| if i == j { 0 } else { v }).collect()).collect();
    Ok(ChordExport {
        keys: m.row_terms.iter().map(|t| t.key.clone()).collect(),
        labels: m.row_terms.iter().map(|t| t.label.clone()).collect(),
        matrix,
    })
}
