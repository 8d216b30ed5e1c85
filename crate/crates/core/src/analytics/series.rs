use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::YearMonth;

use super::mentions::MentionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonthPoint {
    pub month: YearMonth,
    pub count: u64,
    pub negated: u64,
    /// `negated / count`, 0 for empty months.
    pub negativity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlySeries {
    pub term_key: String,
    pub points: Vec<MonthPoint>,
}

impl MonthlySeries {
    pub fn total(&self) -> u64 {
        self.points.iter().map(|p| p.count).sum()
    }

    fn span(&self) -> Option<(YearMonth, YearMonth)> {
        Some((self.points.first()?.month, self.points.last()?.month))
    }

    /// Re-expresses the series over `[from, to]`, filling zeros.
    pub fn aligned(&self, from: YearMonth, to: YearMonth) -> MonthlySeries {
        let by_month: BTreeMap<YearMonth, MonthPoint> = self.points.iter().map(|p| (p.month, *p)).collect();
        let points = months(from, to)
            .map(|m| by_month.get(&m).copied().unwrap_or(MonthPoint { month: m, count: 0, negated: 0, negativity: 0.0 }))
            .collect();
        MonthlySeries { term_key: self.term_key.clone(), points }
    }
}

/// Inclusive month range.
pub fn months(from: YearMonth, to: YearMonth) -> impl Iterator<Item = YearMonth> {
    std::iter::successors(Some(from), move |m| Some(m.succ())).take_while(move |m| *m <= to)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult {
    pub series: MonthlySeries,
    /// Mentions of the term without a known month.
    pub skipped: u64,
}

/// Monthly mention counts for one term key over the observed span.
pub fn monthly_series(mentions: &[MentionRecord], term_key: &str) -> SeriesResult {
    let mut counts: BTreeMap<YearMonth, (u64, u64)> = BTreeMap::new();
    let mut skipped = 0;
    for m in mentions.iter().filter(|m| m.key() == term_key) {
        match m.publish_time.and_then(|d| d.year_month_key()) {
            Some(ym) => {
                let c = counts.entry(ym).or_default();
                c.0 += 1;
                c.1 += u64::from(m.is_negated);
            }
            None => skipped += 1,
        }
    }
    let points = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&first), Some(&last)) => months(first, last)
            .map(|month| {
                let (count, negated) = counts.get(&month).copied().unwrap_or((0, 0));
                let negativity = if count == 0 { 0.0 } else { negated as f64 / count as f64 };
                MonthPoint { month, count, negated, negativity }
            })
            .collect(),
        _ => Vec::new(),
    };
    SeriesResult { series: MonthlySeries { term_key: term_key.to_string(), points }, skipped }
}

/// Union span of all non-empty series.
pub fn common_span(series: &[MonthlySeries]) -> Option<(YearMonth, YearMonth)> {
    series.iter().filter_map(MonthlySeries::span).reduce(|(a0, a1), (b0, b1)| (a0.min(b0), a1.max(b1)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareMonth {
    pub month: YearMonth,
    pub total: u64,
    /// All shares are 0 because no selected term was mentioned.
    pub zero_total: bool,
    /// One share per term, in `SharesTable::terms` order.
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharesTable {
    pub terms: Vec<String>,
    pub months: Vec<ShareMonth>,
}

/// Per-month share of each series in the selected set. Series are aligned
/// to their common span first.
pub fn relative_shares(series: &[MonthlySeries]) -> SharesTable {
    let terms = series.iter().map(|s| s.term_key.clone()).collect();
    let Some((from, to)) = common_span(series) else {
        return SharesTable { terms, months: Vec::new() };
    };
    let aligned: Vec<MonthlySeries> = series.iter().map(|s| s.aligned(from, to)).collect();
    let months = months(from, to)
        .enumerate()
        .map(|(i, month)| {
            let counts: Vec<u64> = aligned.iter().map(|s| s.points[i].count).collect();
            let total: u64 = counts.iter().sum();
            let shares = counts.iter().map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 }).collect();
            ShareMonth { month, total, zero_total: total == 0, shares }
        })
        .collect();
    SharesTable { terms, months }
}
