//! Embedded document store.
//!
//! Documents live in append-only JSON Lines segments under
//! `<root>/segments/NNNN.jsonl`; the newest line for an id is the live
//! version. The id index is rebuilt by scanning all segments on open.
//! Writers hold `<root>/LOCK`; readers need no lock.

mod lock;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::Deserialize;

use crate::ner::model::{AnalyzedPaper, DocumentError, ValidationError};
use lock::LockFile;

pub use lock::LOCK_FILE;

pub const SEGMENTS_DIR: &str = "segments";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("store {path} is locked by process {pid}")]
    Locked { path: PathBuf, pid: String },
    #[error("store {path} does not exist")]
    Missing { path: PathBuf },
    #[error("segment {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("document rejected: {0}")]
    Validation(#[from] ValidationError),
    #[error("stored document is unreadable: {0}")]
    Document(#[from] DocumentError),
    #[error("store was opened read-only")]
    ReadOnly,
}

pub type Result<T> = std::result::Result<T, StoreError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Location {
    segment: u32,
    offset: u64,
    len: u64,
}

#[derive(Debug)]
struct ActiveSegment {
    number: u32,
    file: File,
    len: u64,
}

#[derive(Debug, Default)]
struct Inner {
    index: BTreeMap<String, Location>,
    segments: Vec<u32>,
    writer: Option<ActiveSegment>,
    superseded: usize,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    inner: RwLock<Inner>,
    lock: Option<LockFile>,
}

#[derive(Deserialize)]
struct IdOnly {
    id: String,
}

fn segment_name(number: u32) -> String {
    format!("{number:04}.jsonl")
}

fn list_segments(dir: &Path) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(io_err(dir)(e)),
    };
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(stem) = name.strip_suffix(".jsonl") {
            if !stem.is_empty() && stem.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(n) = stem.parse() {
                    out.push(n);
                }
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

impl Store {
    /// Opens an existing store for reading.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(StoreError::Missing { path: root });
        }
        let inner = Self::load(&root, false)?;
        Ok(Self { root, inner: RwLock::new(inner), lock: None })
    }

    /// Opens (creating if needed) a store for writing, taking the lock.
    pub fn open_writer(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let segments = root.join(SEGMENTS_DIR);
        fs::create_dir_all(&segments).map_err(io_err(&segments))?;
        let lock = LockFile::acquire(&root)?;
        let inner = Self::load(&root, true)?;
        Ok(Self { root, inner: RwLock::new(inner), lock: Some(lock) })
    }

    fn load(root: &Path, repair: bool) -> Result<Inner> {
        let dir = root.join(SEGMENTS_DIR);
        let segments = list_segments(&dir)?;
        let mut inner = Inner { segments: segments.clone(), ..Inner::default() };
        for (pos, &number) in segments.iter().enumerate() {
            let path = dir.join(segment_name(number));
            let is_last = pos + 1 == segments.len();
            let file = File::open(&path).map_err(io_err(&path))?;
            let mut reader = BufReader::new(file);
            let mut offset = 0u64;
            let mut line_no = 0usize;
            let mut buf = Vec::new();
            loop {
                buf.clear();
                let n = reader.read_until(b'\n', &mut buf).map_err(io_err(&path))?;
                if n == 0 {
                    break;
                }
                line_no += 1;
                let complete = buf.ends_with(b"\n");
                let body = buf.strip_suffix(b"\n").unwrap_or(&buf);
                let parsed = if body.iter().all(u8::is_ascii_whitespace) { None } else { Some(serde_json::from_slice::<IdOnly>(body)) };
                match parsed {
                    None => {}
                    Some(Ok(doc)) if complete || !is_last => {
                        let loc = Location { segment: number, offset, len: body.len() as u64 };
                        if inner.index.insert(doc.id, loc).is_some() {
                            inner.superseded += 1;
                        }
                    }
                    Some(result) => {
                        let at_tail = is_last && reader.fill_buf().map_err(io_err(&path))?.is_empty();
                        if !at_tail {
                            let message = match result {
                                Err(e) => e.to_string(),
                                Ok(_) => "unterminated line".into(),
                            };
                            return Err(StoreError::Corrupt { path, line: line_no, message });
                        }
                        tracing::warn!(segment = %path.display(), line = line_no, "ignoring torn trailing line");
                        if repair {
                            let f = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
                            f.set_len(offset).map_err(io_err(&path))?;
                            f.sync_all().map_err(io_err(&path))?;
                        }
                        break;
                    }
                }
                offset += n as u64;
            }
        }
        Ok(inner)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn is_writable(&self) -> bool {
        self.lock.is_some()
    }

    fn segment_path(&self, number: u32) -> PathBuf {
        self.root.join(SEGMENTS_DIR).join(segment_name(number))
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("store lock").index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of stored lines shadowed by a later write of the same id.
    pub fn superseded(&self) -> usize {
        self.inner.read().expect("store lock").superseded
    }

    pub fn ids(&self) -> Vec<String> {
        self.inner.read().expect("store lock").index.keys().cloned().collect()
    }

    pub fn segment_paths(&self) -> Vec<PathBuf> {
        let inner = self.inner.read().expect("store lock");
        inner.segments.iter().map(|&n| self.segment_path(n)).collect()
    }

    /// Total bytes across segment files.
    pub fn disk_size(&self) -> Result<u64> {
        let mut total = 0;
        for path in self.segment_paths() {
            total += fs::metadata(&path).map_err(io_err(&path))?.len();
        }
        Ok(total)
    }

    /// Inserts or fully replaces the document with `doc.id`.
    pub fn upsert(&self, doc: &AnalyzedPaper) -> Result<()> {
        if self.lock.is_none() {
            return Err(StoreError::ReadOnly);
        }
        doc.validate()?;
        let mut line = doc.to_json_string();
        line.push('\n');
        let mut inner = self.inner.write().expect("store lock");
        if inner.writer.is_none() {
            let number = inner.segments.last().map_or(0, |n| n + 1);
            let path = self.segment_path(number);
            let file = OpenOptions::new().create_new(true).append(true).open(&path).map_err(io_err(&path))?;
            inner.segments.push(number);
            inner.writer = Some(ActiveSegment { number, file, len: 0 });
        }
        let writer = inner.writer.as_mut().expect("writer present");
        let number = writer.number;
        let offset = writer.len;
        writer.file.write_all(line.as_bytes()).map_err(io_err(&self.segment_path(number)))?;
        writer.len += line.len() as u64;
        let loc = Location { segment: number, offset, len: line.len() as u64 - 1 };
        if inner.index.insert(doc.id.clone(), loc).is_some() {
            inner.superseded += 1;
        }
        Ok(())
    }

    /// Makes all upserts so far durable.
    pub fn flush(&self) -> Result<()> {
        let inner = self.inner.read().expect("store lock");
        if let Some(w) = &inner.writer {
            w.file.sync_data().map_err(io_err(&self.segment_path(w.number)))?;
        }
        Ok(())
    }

    fn read_raw(&self, loc: Location, files: &mut HashMap<u32, File>) -> Result<Vec<u8>> {
        let path = self.segment_path(loc.segment);
        let file = match files.entry(loc.segment) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(File::open(&path).map_err(io_err(&path))?),
        };
        file.seek(SeekFrom::Start(loc.offset)).map_err(io_err(&path))?;
        let mut buf = vec![0; loc.len as usize];
        file.read_exact(&mut buf).map_err(io_err(&path))?;
        Ok(buf)
    }

    fn decode(&self, loc: Location, raw: &[u8]) -> Result<AnalyzedPaper> {
        let text = std::str::from_utf8(raw).map_err(|e| StoreError::Corrupt {
            path: self.segment_path(loc.segment),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(AnalyzedPaper::from_json_str(text)?)
    }

    pub fn get(&self, id: &str) -> Result<Option<AnalyzedPaper>> {
        let loc = self.inner.read().expect("store lock").index.get(id).copied();
        match loc {
            None => Ok(None),
            Some(loc) => {
                let raw = self.read_raw(loc, &mut HashMap::new())?;
                self.decode(loc, &raw).map(Some)
            }
        }
    }

    /// Live documents in id order.
    pub fn scan(&self) -> Scan<'_> {
        let locations: Vec<Location> = self.inner.read().expect("store lock").index.values().copied().collect();
        Scan { store: self, locations: locations.into_iter(), files: HashMap::new() }
    }

    /// Collects [`Store::scan`], stopping at the first error.
    pub fn load_all(&self) -> Result<Vec<AnalyzedPaper>> {
        self.scan().collect()
    }

    /// Rewrites the live set into one id-ordered segment and deletes the
    /// older segments. Requires the writer lock.
    pub fn compact(&self) -> Result<()> {
        if self.lock.is_none() {
            return Err(StoreError::ReadOnly);
        }
        let mut inner = self.inner.write().expect("store lock");
        let already_compact = inner.superseded == 0
            && inner.segments.len() <= 1
            && inner.index.values().zip(inner.index.values().skip(1)).all(|(a, b)| a.offset < b.offset);
        if already_compact {
            return Ok(());
        }
        let number = inner.segments.last().map_or(0, |n| n + 1);
        let final_path = self.segment_path(number);
        let tmp_path = final_path.with_extension("jsonl.tmp");
        let mut out = File::create(&tmp_path).map_err(io_err(&tmp_path))?;
        let mut files = HashMap::new();
        let mut new_index = BTreeMap::new();
        let mut offset = 0u64;
        for (id, &loc) in &inner.index {
            let raw = self.read_raw(loc, &mut files)?;
            out.write_all(&raw).map_err(io_err(&tmp_path))?;
            out.write_all(b"\n").map_err(io_err(&tmp_path))?;
            new_index.insert(id.clone(), Location { segment: number, offset, len: raw.len() as u64 });
            offset += raw.len() as u64 + 1;
        }
        out.sync_all().map_err(io_err(&tmp_path))?;
        drop(out);
        drop(files);
        fs::rename(&tmp_path, &final_path).map_err(io_err(&final_path))?;
        let dir = self.root.join(SEGMENTS_DIR);
        if let Ok(d) = File::open(&dir) {
            let _ = d.sync_all();
        }
        inner.writer = None;
        for &old in &inner.segments {
            let path = self.segment_path(old);
            fs::remove_file(&path).map_err(io_err(&path))?;
        }
        inner.segments = vec![number];
        inner.index = new_index;
        inner.superseded = 0;
        Ok(())
    }

    /// Upserts every live document of each store in `roots`, in argument
    /// order, so a later root wins for a shared id. Returns the number of
    /// documents copied.
    pub fn merge_from<P: AsRef<Path>>(&self, roots: &[P]) -> Result<usize> {
        let mut copied = 0;
        for root in roots {
            let shard = Store::open(root)?;
            for doc in shard.scan() {
                self.upsert(&doc?)?;
                copied += 1;
            }
        }
        self.flush()?;
        Ok(copied)
    }
}

pub struct Scan<'a> {
    store: &'a Store,
    locations: std::vec::IntoIter<Location>,
    files: HashMap<u32, File>,
}

impl Iterator for Scan<'_> {
    type Item = Result<AnalyzedPaper>;

    fn next(&mut self) -> Option<Self::Item> {
        let loc = self.locations.next()?;
        Some(self.store.read_raw(loc, &mut self.files).and_then(|raw| self.store.decode(loc, &raw)))
    }
}
