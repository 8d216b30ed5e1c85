//! Corpus metadata ingest: CSV parsing, duplicate-id resolution and shard
//! membership.

mod date;

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

pub use date::{InvalidDate, PublishDate, YearMonth};

/// One metadata row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub cord_uid: String,
    pub title: String,
    pub journal: Option<String>,
    pub authors: Option<String>,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub publish_time: Option<PublishDate>,
    pub doi: Option<String>,
}

impl PaperRecord {
    /// A record with only the mandatory fields set.
    pub fn new(cord_uid: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Self {
            cord_uid: cord_uid.into(),
            title: title.into(),
            journal: None,
            authors: None,
            abstract_text: abstract_text.into(),
            publish_time: None,
            doi: None,
        }
    }

    pub fn with_date(mut self, date: PublishDate) -> Self {
        self.publish_time = Some(date);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("metadata header is missing mandatory column `{0}`")]
    MissingColumn(&'static str),
    #[error("metadata row {row} (line {line}) is not valid UTF-8")]
    InvalidUtf8 { row: u64, line: u64 },
    #[error("metadata header is not valid UTF-8")]
    InvalidHeader,
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Result of [`parse_metadata`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ingested {
    pub records: Vec<PaperRecord>,
    /// Data rows dropped because their `cord_uid` was empty.
    pub dropped_empty_id: usize,
    /// Rows whose `publish_time` was present but not in an accepted format.
    pub malformed_dates: usize,
}

const MANDATORY: [&str; 4] = ["cord_uid", "title", "abstract", "publish_time"];

/// Parses CORD-style `metadata.csv` content.
///
/// Columns are located by header name; columns other than `cord_uid`,
/// `title`, `journal`, `authors`, `abstract`, `publish_time` and `doi` are
/// ignored.
pub fn parse_metadata<R: Read>(input: R) -> Result<Ingested, IngestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = reader.byte_headers()?.clone();
    let names: Vec<&str> = header.iter().map(std::str::from_utf8).collect::<Result<_, _>>().map_err(|_| IngestError::InvalidHeader)?;
    let column = |name: &str| names.iter().position(|h| h.trim().trim_start_matches('\u{feff}') == name);
    let mut mandatory = [0usize; 4];
    for (slot, name) in mandatory.iter_mut().zip(MANDATORY) {
        *slot = column(name).ok_or(IngestError::MissingColumn(name))?;
    }
    let [uid_col, title_col, abstract_col, date_col] = mandatory;
    let journal_col = column("journal");
    let authors_col = column("authors");
    let doi_col = column("doi");

    let mut out = Ingested::default();
    let mut row = csv::ByteRecord::new();
    let mut row_no = 0u64;
    while reader.read_byte_record(&mut row)? {
        row_no += 1;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<&str, IngestError> {
            std::str::from_utf8(row.get(idx).unwrap_or_default()).map_err(|_| IngestError::InvalidUtf8 { row: row_no, line })
        };
        let optional = |idx: Option<usize>| -> Result<Option<String>, IngestError> {
            Ok(match idx {
                Some(i) => Some(field(i)?.trim()).filter(|s| !s.is_empty()).map(str::to_string),
                None => None,
            })
        };
        // decode every field up front so bad bytes anywhere in the row are fatal
        for idx in 0..row.len() {
            field(idx)?;
        }

        let cord_uid = field(uid_col)?.trim();
        if cord_uid.is_empty() {
            out.dropped_empty_id += 1;
            continue;
        }
        let raw_date = field(date_col)?.trim();
        let publish_time = if raw_date.is_empty() {
            None
        } else {
            match raw_date.parse::<PublishDate>() {
                Ok(d) => Some(d),
                Err(_) => {
                    out.malformed_dates += 1;
                    None
                }
            }
        };
        out.records.push(PaperRecord {
            cord_uid: cord_uid.to_string(),
            title: field(title_col)?.to_string(),
            journal: optional(journal_col)?,
            authors: optional(authors_col)?,
            abstract_text: field(abstract_col)?.to_string(),
            publish_time,
            doi: optional(doi_col)?,
        });
    }
    Ok(out)
}

/// Collapses records sharing a `cord_uid`.
///
/// The surviving record per id is the one with the latest `publish_time`
/// (absent dates sort first); among equal dates the later row wins. Output
/// order follows the first occurrence of each id. Returns the survivors and
/// the number of dropped duplicates.
pub fn dedupe(records: Vec<PaperRecord>) -> (Vec<PaperRecord>, usize) {
    let total = records.len();
    let mut slot_of: HashMap<String, usize> = HashMap::new();
    let mut slots: Vec<PaperRecord> = Vec::new();
    for record in records {
        match slot_of.get(&record.cord_uid) {
            Some(&slot) => {
                if record.publish_time >= slots[slot].publish_time {
                    slots[slot] = record;
                }
            }
            None => {
                slot_of.insert(record.cord_uid.clone(), slots.len());
                slots.push(record);
            }
        }
    }
    let dropped = total - slots.len();
    (slots, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ShardError {
    #[error("node count must be positive")]
    ZeroNodes,
    #[error("node {node} is out of range for {nodes} nodes")]
    NodeOutOfRange { node: usize, nodes: usize },
}

/// Whether row `index` belongs to shard `node` of `nodes`.
pub fn shard_filter(index: usize, node: usize, nodes: usize) -> Result<bool, ShardError> {
    if nodes == 0 {
        return Err(ShardError::ZeroNodes);
    }
    if node >= nodes {
        return Err(ShardError::NodeOutOfRange { node, nodes });
    }
    Ok(index % nodes == node)
}
