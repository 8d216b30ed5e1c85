//! Corpus aggregates over analyzed papers: per-term rollups with
//! negativity, monthly series and shares, co-occurrence matrices and the
//! Sankey / chord exports built from them.

pub mod cooccur;
pub mod export;
pub mod mentions;
pub mod series;

pub use cooccur::{
    chord_export, cooccurrence, sankey_export, top_terms, ChordExport, CooccurrenceMatrix, CountMode, SankeyExport, TermSpec,
};
pub use export::{ExportError, ExportOptions};
pub use mentions::{
    category_counts, entity_key, extract_mentions, fold_surface, papers_with_term, rollup, surface_counts, term_key, MentionRecord,
    OntologyTermStats, RollupOptions,
};
pub use series::{monthly_series, relative_shares, MonthlySeries, SharesTable};
