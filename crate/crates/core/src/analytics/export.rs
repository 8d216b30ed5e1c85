//! Serialized exports. The CLI and the HTTP API both call these, so the
//! same snapshot yields the same bytes from either.

use serde::Serialize;
use serde_json::json;

use crate::corpus::YearMonth;
use crate::ner::{AnalyzedPaper, EntityCategory};

use super::cooccur::{chord_export, cooccurrence, top_terms, CooccurrenceMatrix, CountMode, TermSpec};
use super::mentions::{extract_mentions, rollup, RollupOptions};
use super::series::{monthly_series, relative_shares, MonthPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub top: usize,
    pub rollup: RollupOptions,
    pub mode: CountMode,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { top: 10, rollup: RollupOptions::default(), mode: CountMode::Binary }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExportError {
    #[error("no mentions of term `{0}`")]
    UnknownTerm(String),
}

fn to_bytes(v: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("export values serialize");
    out.push(b'\n');
    out
}

#[derive(Serialize)]
struct SeriesOut {
    term_key: String,
    name: String,
    total: u64,
    skipped: u64,
    points: Vec<MonthPoint>,
}

/// Monthly series for one term (`term`) or for the `top` terms of
/// `category`.
pub fn timeseries_json(
    papers: &[AnalyzedPaper],
    category: Option<&EntityCategory>,
    term: Option<&str>,
    opts: ExportOptions,
) -> Result<Vec<u8>, ExportError> {
    let mentions = extract_mentions(papers, category);
    let stats = rollup(&mentions, opts.rollup);
    let selected: Vec<_> = match term {
        Some(key) => {
            let s = stats.iter().find(|s| s.key == key).ok_or_else(|| ExportError::UnknownTerm(key.to_string()))?;
            vec![s]
        }
        None => stats.iter().take(opts.top).collect(),
    };
    let series: Vec<SeriesOut> = selected
        .into_iter()
        .map(|s| {
            let r = monthly_series(&mentions, &s.key);
            SeriesOut {
                term_key: s.key.clone(),
                name: s.name.clone(),
                total: r.series.total(),
                skipped: r.skipped,
                points: r.series.points,
            }
        })
        .collect();
    Ok(to_bytes(&json!({
        "category": category.map(EntityCategory::as_str),
        "series": series,
    })))
}

/// Per-month shares among the `k` most mentioned terms of `category`.
pub fn shares_json(papers: &[AnalyzedPaper], category: &EntityCategory, k: usize, opts: ExportOptions) -> Vec<u8> {
    let mentions = extract_mentions(papers, Some(category));
    let stats = rollup(&mentions, opts.rollup);
    let top: Vec<_> = stats.iter().take(k).collect();
    let series: Vec<_> = top.iter().map(|s| monthly_series(&mentions, &s.key).series).collect();
    let table = relative_shares(&series);

    #[derive(Serialize)]
    struct Month {
        month: YearMonth,
        total: u64,
        zero_total: bool,
        shares: Vec<f64>,
    }
    let months: Vec<Month> =
        table.months.into_iter().map(|m| Month { month: m.month, total: m.total, zero_total: m.zero_total, shares: m.shares }).collect();
    to_bytes(&json!({
        "category": category.as_str(),
        "k": k,
        "terms": top.iter().map(|s| json!({"key": s.key, "name": s.name})).collect::<Vec<_>>(),
        "months": months,
    }))
}

fn all_terms(papers: &[AnalyzedPaper], category: &EntityCategory, opts: ExportOptions) -> Vec<TermSpec> {
    top_terms(papers, category, usize::MAX, opts.rollup)
}

/// Matrix between the `top` terms of two categories.
pub fn cooccur_matrix(papers: &[AnalyzedPaper], rows: &EntityCategory, cols: &EntityCategory, opts: ExportOptions) -> CooccurrenceMatrix {
    let r = top_terms(papers, rows, opts.top, opts.rollup);
    let c = if rows == cols { r.clone() } else { top_terms(papers, cols, opts.top, opts.rollup) };
    cooccurrence(papers, &r, &c, opts.mode)
}

fn mode_name(mode: CountMode) -> &'static str {
    match mode {
        CountMode::Binary => "binary",
        CountMode::Multiplicity => "multiplicity",
    }
}

pub fn cooccur_json(papers: &[AnalyzedPaper], rows: &EntityCategory, cols: &EntityCategory, opts: ExportOptions) -> Vec<u8> {
    let m = cooccur_matrix(papers, rows, cols, opts);
    let axis = |terms: &[TermSpec], papers: &[u64]| -> Vec<serde_json::Value> {
        terms.iter().zip(papers).map(|(t, n)| json!({"key": t.key, "label": t.label, "papers": n})).collect()
    };
    to_bytes(&json!({
        "row_category": rows.as_str(),
        "col_category": cols.as_str(),
        "mode": mode_name(opts.mode),
        "papers": m.papers,
        "rows": axis(&m.row_terms, &m.row_papers),
        "cols": axis(&m.col_terms, &m.col_papers),
        "counts": m.counts,
    }))
}

pub fn cooccur_csv(papers: &[AnalyzedPaper], rows: &EntityCategory, cols: &EntityCategory, opts: ExportOptions) -> Vec<u8> {
    cooccur_matrix(papers, rows, cols, opts).to_csv()
}

/// Sankey between two categories; nodes are the `top` terms per side by
/// co-occurrence weight.
pub fn sankey_json(papers: &[AnalyzedPaper], rows: &EntityCategory, cols: &EntityCategory, opts: ExportOptions) -> Vec<u8> {
    let m = cooccurrence(papers, &all_terms(papers, rows, opts), &all_terms(papers, cols, opts), opts.mode);
    let s = super::cooccur::sankey_export(&m, opts.top);
    to_bytes(&json!({
        "row_category": rows.as_str(),
        "col_category": cols.as_str(),
        "mode": mode_name(opts.mode),
        "nodes": s.nodes,
        "links": s.links,
    }))
}

/// Chord among the `top` most mentioned terms of one category.
pub fn chord_json(papers: &[AnalyzedPaper], category: &EntityCategory, opts: ExportOptions) -> Vec<u8> {
    let m = cooccur_matrix(papers, category, category, opts);
    let c = chord_export(&m).expect("square by construction");
    to_bytes(&json!({
        "category": category.as_str(),
        "mode": mode_name(opts.mode),
        "keys": c.keys,
        "labels": c.labels,
        "matrix": c.matrix,
    }))
}
