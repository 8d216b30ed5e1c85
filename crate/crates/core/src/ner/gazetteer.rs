//! Dictionary matcher backing the local extractor.
//!
//! Surfaces are folded per character (so offsets stay aligned with the
//! source text) and stored in a trie. Matching runs left to right, takes the
//! longest surface that starts and ends on a word boundary, then resumes
//! after it.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use super::category::EntityCategory;
use super::model::EntityLink;

const BUNDLED_TSV: &str = include_str!("../../data/seed_gazetteer.tsv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub surface: String,
    pub category: EntityCategory,
    pub umls_id: Option<String>,
    pub extra_links: Vec<EntityLink>,
}

impl GazetteerEntry {
    pub fn new(surface: impl Into<String>, category: EntityCategory, umls_id: Option<&str>) -> Self {
        Self { surface: surface.into(), category, umls_id: umls_id.map(str::to_string), extra_links: Vec::new() }
    }

    /// UMLS link first, then any extra links.
    pub fn links(&self) -> Vec<EntityLink> {
        self.umls_id.iter().map(EntityLink::umls).chain(self.extra_links.iter().cloned()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GazetteerError {
    #[error("gazetteer is empty")]
    Empty,
    #[error("gazetteer line {0}: surface is empty")]
    EmptySurface(usize),
    #[error("gazetteer line {line}: expected `surface<TAB>category<TAB>umls_id`")]
    Columns { line: usize },
    #[error("gazetteer line {line}: {source}")]
    Category { line: usize, source: super::category::UnknownCategory },
    #[error("gazetteer line {line}: malformed extra link `{link}` (want SOURCE:ID)")]
    Link { line: usize, link: String },
    #[error("reading gazetteer: {0}")]
    Io(#[from] std::io::Error),
}

/// A gazetteer hit, in character units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub start: usize,
    pub len: usize,
    pub entry: usize,
}

#[derive(Debug, Default, Clone)]
struct Node {
    children: HashMap<char, usize>,
    terminal: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    nodes: Vec<Node>,
}

pub(crate) fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn boundary(chars: &[char], at: usize) -> bool {
    at == 0 || at == chars.len() || is_word_char(chars[at - 1]) != is_word_char(chars[at])
}

impl Gazetteer {
    /// Builds the matcher. When two entries fold to the same surface the
    /// first one is kept.
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Self, GazetteerError> {
        if entries.is_empty() {
            return Err(GazetteerError::Empty);
        }
        let mut nodes = vec![Node::default()];
        for (idx, entry) in entries.iter().enumerate() {
            if entry.surface.is_empty() {
                return Err(GazetteerError::EmptySurface(idx + 1));
            }
            let mut cur = 0;
            for c in entry.surface.chars().map(fold_char) {
                cur = match nodes[cur].children.get(&c) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[cur].children.insert(c, next);
                        next
                    }
                };
            }
            if nodes[cur].terminal.is_none() {
                nodes[cur].terminal = Some(idx);
            } else {
                tracing::debug!(surface = %entry.surface, "duplicate gazetteer surface ignored");
            }
        }
        Ok(Self { entries, nodes })
    }

    /// The seed dictionary shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_tsv(BUNDLED_TSV.as_bytes()).expect("bundled gazetteer is valid")
    }

    pub fn bundled_tsv() -> &'static str {
        BUNDLED_TSV
    }

    /// Reads `surface<TAB>category<TAB>umls_id[<TAB>SRC:ID;SRC:ID]`.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_tsv<R: Read>(input: R) -> Result<Self, GazetteerError> {
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(GazetteerError::Columns { line: line_no });
            }
            let surface = cols[0].trim();
            if surface.is_empty() {
                return Err(GazetteerError::EmptySurface(line_no));
            }
            let category = cols[1].trim().parse().map_err(|source| GazetteerError::Category { line: line_no, source })?;
            let umls_id = cols.get(2).map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::to_string);
            let mut extra_links = Vec::new();
            if let Some(extra) = cols.get(3) {
                for link in extra.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                    match link.split_once(':') {
                        Some((src, id)) if !src.is_empty() && !id.is_empty() => extra_links.push(EntityLink::new(src, id)),
                        _ => return Err(GazetteerError::Link { line: line_no, link: link.to_string() }),
                    }
                }
            }
            entries.push(GazetteerEntry { surface: surface.to_string(), category, umls_id, extra_links });
        }
        Self::new(entries)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# surface\tcategory\tumls_id\textra_links\n");
        for e in &self.entries {
            let extra: Vec<String> = e.extra_links.iter().map(|l| format!("{}:{}", l.data_source, l.id)).collect();
            out.push_str(&format!("{}\t{}\t{}", e.surface, e.category, e.umls_id.as_deref().unwrap_or("")));
            if !extra.is_empty() {
                out.push('\t');
                out.push_str(&extra.join(";"));
            }
            out.push('\n');
        }
        out
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &GazetteerEntry {
        &self.entries[idx]
    }

    /// Non-overlapping longest matches over `chars`, left to right.
    pub fn find(&self, chars: &[char]) -> Vec<Match> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            if !boundary(chars, start) {
                start += 1;
                continue;
            }
            let mut cur = 0;
            let mut best: Option<(usize, usize)> = None;
            for (pos, &c) in chars.iter().enumerate().skip(start) {
                match self.nodes[cur].children.get(&fold_char(c)) {
                    Some(&next) => cur = next,
                    None => break,
                }
                if let Some(entry) = self.nodes[cur].terminal {
                    if boundary(chars, pos + 1) {
                        best = Some((pos + 1 - start, entry));
                    }
                }
            }
            match best {
                Some((len, entry)) => {
                    out.push(Match { start, len, entry });
                    start += len;
                }
                None => start += 1,
            }
        }
        out
    }
}
