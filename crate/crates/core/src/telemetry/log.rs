//! Chunked binary run log.
//!
//! A chunk file `run_<id>_<seq>.log` is
//!
//! ```text
//! header   "RLOG" version:u16 seq:u32                         10 B
//! records  topic:u16 stamp_ns:u64 len:u32 payload[len]        14 B + len
//! index    per topic: topic:u16 count:u32 offset:u32 * count
//! trailer  index_len:u32 flags:u8 "RIDX"                       9 B
//! ```
//!
//! All integers little-endian. Offsets are from the start of the file.
//! `flags & 1` marks the last chunk of a run. The byte budget covers the
//! whole file, index included.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"RLOG";
pub const INDEX_MAGIC: &[u8; 4] = b"RIDX";
pub const VERSION: u16 = 1;
pub const HEADER_SIZE: usize = 10;
pub const RECORD_OVERHEAD: usize = 14;
pub const TRAILER_SIZE: usize = 9;
pub const DEFAULT_BUDGET: usize = 16 << 20;

const FLAG_FINAL: u8 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("{path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },
    #[error("no chunks for run `{0}`")]
    Empty(String),
    #[error("recording disabled after disk error: {0}")]
    Disabled(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub topic: u16,
    pub stamp_ns: u64,
    pub payload: Vec<u8>,
}

pub fn chunk_name(run_id: &str, seq: u32) -> String {
    format!("run_{run_id}_{seq}.log")
}

struct OpenChunk {
    seq: u32,
    file: BufWriter<File>,
    size: usize,
    last_stamp: u64,
    index: BTreeMap<u16, Vec<u32>>,
}

impl OpenChunk {
    fn index_size(&self) -> usize {
        self.index.values().map(|v| 6 + 4 * v.len()).sum()
    }

    /// Size the file would have if closed after adding one `len`-byte record
    /// on `topic`.
    fn size_with(&self, topic: u16, len: usize) -> usize {
        let new_topic = if self.index.contains_key(&topic) { 0 } else { 6 };
        self.size + RECORD_OVERHEAD + len + self.index_size() + new_topic + TRAILER_SIZE
    }

    fn records(&self) -> usize {
        self.index.values().map(Vec::len).sum()
    }
}

/// Writes records into budget-limited chunks. A disk error disables the
/// logger; later calls are no-ops.
pub struct ChunkLogger {
    dir: PathBuf,
    run_id: String,
    budget: usize,
    next_seq: u32,
    current: Option<OpenChunk>,
    disabled: Option<String>,
    written: Vec<PathBuf>,
}

impl ChunkLogger {
    pub fn new(dir: impl Into<PathBuf>, run_id: &str, budget: usize) -> Self {
        Self {
            dir: dir.into(),
            run_id: run_id.to_string(),
            budget,
            next_seq: 0,
            current: None,
            disabled: None,
            written: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.disabled.is_none()
    }

    pub fn disabled_reason(&self) -> Option<&str> {
        self.disabled.as_deref()
    }

    pub fn chunks(&self) -> &[PathBuf] {
        &self.written
    }

    /// Appends a record. Rotates first if the record would overflow the
    /// budget or go back in time. A record larger than an empty chunk's
    /// budget gets a chunk to itself.
    pub fn log_record(&mut self, topic: u16, stamp_ns: u64, payload: &[u8]) -> Result<(), LogError> {
        if let Some(reason) = &self.disabled {
            return Err(LogError::Disabled(reason.clone()));
        }
        let r = self.try_record(topic, stamp_ns, payload);
        self.disable_on_err(r)
    }

    pub fn rotate_chunk(&mut self) -> Result<(), LogError> {
        if let Some(reason) = &self.disabled {
            return Err(LogError::Disabled(reason.clone()));
        }
        let r = self.close(false);
        self.disable_on_err(r)
    }

    /// Closes the last chunk and marks it final.
    pub fn finish(&mut self) -> Result<Vec<PathBuf>, LogError> {
        if let Some(reason) = &self.disabled {
            return Err(LogError::Disabled(reason.clone()));
        }
        let r = self.close(true);
        self.disable_on_err(r)?;
        Ok(self.written.clone())
    }

    fn disable_on_err(&mut self, r: Result<(), LogError>) -> Result<(), LogError> {
        if let Err(e) = &r {
            self.disabled = Some(e.to_string());
            self.current = None;
        }
        r
    }

    fn try_record(&mut self, topic: u16, stamp_ns: u64, payload: &[u8]) -> Result<(), LogError> {
        let len = u32::try_from(payload.len()).map_err(|_| io::Error::other("payload too large"))?;
        if let Some(c) = &self.current {
            let overflow = c.size_with(topic, payload.len()) > self.budget;
            if c.records() > 0 && (overflow || stamp_ns < c.last_stamp) {
                self.close(false)?;
            }
        }
        if self.current.is_none() {
            self.open()?;
        }
        let c = self.current.as_mut().expect("chunk open");
        let offset = c.size as u32;
        c.file.write_all(&topic.to_le_bytes())?;
        c.file.write_all(&stamp_ns.to_le_bytes())?;
        c.file.write_all(&len.to_le_bytes())?;
        c.file.write_all(payload)?;
        c.size += RECORD_OVERHEAD + payload.len();
        c.last_stamp = stamp_ns;
        c.index.entry(topic).or_default().push(offset);
        Ok(())
    }

    fn open(&mut self) -> Result<(), LogError> {
        fs::create_dir_all(&self.dir)?;
        let seq = self.next_seq;
        let path = self.dir.join(chunk_name(&self.run_id, seq));
        let mut file = BufWriter::new(File::create(&path)?);
        file.write_all(MAGIC)?;
        file.write_all(&VERSION.to_le_bytes())?;
        file.write_all(&seq.to_le_bytes())?;
        self.next_seq += 1;
        self.written.push(path);
        self.current = Some(OpenChunk { seq, file, size: HEADER_SIZE, last_stamp: 0, index: BTreeMap::new() });
        Ok(())
    }

    fn close(&mut self, last: bool) -> Result<(), LogError> {
        let Some(mut c) = self.current.take() else {
            return Ok(());
        };
        let mut idx = Vec::with_capacity(c.index_size());
        for (topic, offsets) in &c.index {
            idx.extend_from_slice(&topic.to_le_bytes());
            idx.extend_from_slice(&(offsets.len() as u32).to_le_bytes());
            for o in offsets {
                idx.extend_from_slice(&o.to_le_bytes());
            }
        }
        c.file.write_all(&idx)?;
        c.file.write_all(&(idx.len() as u32).to_le_bytes())?;
        c.file.write_all(&[if last { FLAG_FINAL } else { 0 }])?;
        c.file.write_all(INDEX_MAGIC)?;
        c.file.flush()?;
        let _ = c.seq;
        Ok(())
    }
}

impl Drop for ChunkLogger {
    fn drop(&mut self) {
        if self.disabled.is_none() {
            let _ = self.close(false);
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chunk {
    pub seq: u32,
    pub path: PathBuf,
    pub last: bool,
    pub records: Vec<Record>,
    pub index: BTreeMap<u16, Vec<u32>>,
}

/// Parses one chunk file and checks its index against the records.
pub fn read_chunk(path: &Path) -> Result<Chunk, LogError> {
    let bytes = fs::read(path)?;
    let bad = |msg: &str| LogError::Corrupt { path: path.to_path_buf(), msg: msg.to_string() };
    if bytes.len() < HEADER_SIZE + 4 + TRAILER_SIZE || &bytes[..4] != MAGIC {
        return Err(bad("missing header"));
    }
    if u16::from_le_bytes([bytes[4], bytes[5]]) != VERSION {
        return Err(bad("unsupported version"));
    }
    let seq = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
    let n = bytes.len();
    if &bytes[n - 4..] != INDEX_MAGIC {
        return Err(bad("missing index trailer (truncated chunk)"));
    }
    let flags = bytes[n - 5];
    let idx_len = u32::from_le_bytes(bytes[n - 9..n - 5].try_into().expect("4 bytes")) as usize;
    let idx_end = n - TRAILER_SIZE;
    let idx_start = idx_end.checked_sub(idx_len).filter(|&s| s >= HEADER_SIZE).ok_or_else(|| bad("index length"))?;

    let mut records = Vec::new();
    let mut offsets = Vec::new();
    let mut at = HEADER_SIZE;
    while at < idx_start {
        if at + RECORD_OVERHEAD > idx_start {
            return Err(bad("record header overruns index"));
        }
        let topic = u16::from_le_bytes(bytes[at..at + 2].try_into().expect("2 bytes"));
        let stamp_ns = u64::from_le_bytes(bytes[at + 2..at + 10].try_into().expect("8 bytes"));
        let len = u32::from_le_bytes(bytes[at + 10..at + 14].try_into().expect("4 bytes")) as usize;
        let end = at + RECORD_OVERHEAD + len;
        if end > idx_start {
            return Err(bad("record payload overruns index"));
        }
        offsets.push((topic, at as u32));
        records.push(Record { topic, stamp_ns, payload: bytes[at + RECORD_OVERHEAD..end].to_vec() });
        at = end;
    }

    let mut index: BTreeMap<u16, Vec<u32>> = BTreeMap::new();
    let mut p = idx_start;
    while p < idx_end {
        if p + 6 > idx_end {
            return Err(bad("index entry"));
        }
        let topic = u16::from_le_bytes(bytes[p..p + 2].try_into().expect("2 bytes"));
        let count = u32::from_le_bytes(bytes[p + 2..p + 6].try_into().expect("4 bytes")) as usize;
        p += 6;
        if p + 4 * count > idx_end {
            return Err(bad("index entry"));
        }
        let list = (0..count)
            .map(|i| u32::from_le_bytes(bytes[p + 4 * i..p + 4 * i + 4].try_into().expect("4 bytes")))
            .collect();
        p += 4 * count;
        index.insert(topic, list);
    }
    let mut expect: BTreeMap<u16, Vec<u32>> = BTreeMap::new();
    for (t, o) in offsets {
        expect.entry(t).or_default().push(o);
    }
    if expect != index {
        return Err(bad("index does not match records"));
    }
    if records.windows(2).any(|w| w[1].stamp_ns < w[0].stamp_ns) {
        return Err(bad("records out of stamp order"));
    }
    Ok(Chunk { seq, path: path.to_path_buf(), last: flags & FLAG_FINAL != 0, records, index })
}

/// What a reader could not recover.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GapReport {
    /// Sequence numbers with no file.
    pub missing: Vec<u32>,
    /// Files that exist but failed to parse, with the reason.
    pub corrupt: Vec<(u32, String)>,
    /// No chunk carried the final flag: the run may continue past the last file.
    pub unterminated: bool,
}

impl GapReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty() && self.corrupt.is_empty() && !self.unterminated
    }
}

impl std::fmt::Display for GapReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_complete() {
            return write!(f, "complete");
        }
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing chunks {:?}", self.missing));
        }
        for (seq, why) in &self.corrupt {
            parts.push(format!("chunk {seq} unreadable ({why})"));
        }
        if self.unterminated {
            parts.push("final chunk absent".to_string());
        }
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub run_id: String,
    pub records: Vec<Record>,
    pub gaps: GapReport,
}

impl RunLog {
    pub fn topic(&self, topic: u16) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.topic == topic)
    }
}

/// Splits `run_<id>_<seq>.log` into (id, seq).
pub fn parse_chunk_name(name: &str) -> Option<(String, u32)> {
    let stem = name.strip_prefix("run_")?.strip_suffix(".log")?;
    let (id, seq) = stem.rsplit_once('_')?;
    Some((id.to_string(), seq.parse().ok()?))
}

/// Reads a run given its directory (single run inside) or any of its chunk
/// files. Missing or damaged chunks are skipped and reported.
pub fn read_run(path: &Path) -> Result<RunLog, LogError> {
    let (dir, wanted) = if path.is_dir() {
        (path.to_path_buf(), None)
    } else {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let (id, _) = parse_chunk_name(name)
            .ok_or_else(|| LogError::Corrupt { path: path.to_path_buf(), msg: "not a chunk file name".into() })?;
        (path.parent().map(Path::to_path_buf).unwrap_or_default(), Some(id))
    };
    let mut found: BTreeMap<String, BTreeMap<u32, PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(&dir)? {
        let p = entry?.path();
        if let Some((id, seq)) = p.file_name().and_then(|n| n.to_str()).and_then(parse_chunk_name) {
            found.entry(id).or_default().insert(seq, p);
        }
    }
    let run_id = match wanted {
        Some(id) => id,
        None => match found.len() {
            1 => found.keys().next().cloned().expect("one run"),
            0 => return Err(LogError::Empty(dir.display().to_string())),
            _ => {
                return Err(LogError::Corrupt {
                    path: dir,
                    msg: format!("several runs present: {:?}", found.keys().collect::<Vec<_>>()),
                })
            }
        },
    };
    let files = found.remove(&run_id).ok_or_else(|| LogError::Empty(run_id.clone()))?;
    let max_seq = *files.keys().next_back().expect("non-empty");
    let mut gaps = GapReport { unterminated: true, ..Default::default() };
    let mut records = Vec::new();
    for seq in 0..=max_seq {
        let Some(p) = files.get(&seq) else {
            gaps.missing.push(seq);
            continue;
        };
        match read_chunk(p) {
            Ok(c) => {
                if c.last {
                    gaps.unterminated = false;
                }
                records.extend(c.records);
            }
            Err(e) => gaps.corrupt.push((seq, e.to_string())),
        }
    }
    Ok(RunLog { run_id, records, gaps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_names_parse_back() {
        assert_eq!(chunk_name("abc_1", 7), "run_abc_1_7.log");
        assert_eq!(parse_chunk_name("run_abc_1_7.log"), Some(("abc_1".into(), 7)));
        assert_eq!(parse_chunk_name("run_x.log"), None);
        assert_eq!(parse_chunk_name("other_a_1.log"), None);
    }

    #[test]
    fn zero_records_zero_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = ChunkLogger::new(dir.path(), "z", 4096);
        assert!(log.finish().unwrap().is_empty());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn records_roundtrip_with_index() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = ChunkLogger::new(dir.path(), "r", DEFAULT_BUDGET);
        log.log_record(1, 10, b"abc").unwrap();
        log.log_record(2, 20, b"").unwrap();
        log.log_record(1, 30, b"de").unwrap();
        let files = log.finish().unwrap();
        assert_eq!(files.len(), 1);
        let c = read_chunk(&files[0]).unwrap();
        assert!(c.last);
        assert_eq!(c.records.len(), 3);
        assert_eq!(c.index[&1], vec![10, 10 + 14 + 3 + 14]);
        assert_eq!(c.records[2].payload, b"de");
        assert_eq!(fs::metadata(&files[0]).unwrap().len() as usize, 10 + 3 * 14 + 5 + 6 * 2 + 4 * 3 + 9);
    }

    #[test]
    fn stamp_regression_rotates() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = ChunkLogger::new(dir.path(), "s", DEFAULT_BUDGET);
        log.log_record(1, 50, b"a").unwrap();
        log.log_record(1, 40, b"b").unwrap();
        assert_eq!(log.finish().unwrap().len(), 2);
    }

    #[test]
    fn disk_error_disables_recording() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let mut log = ChunkLogger::new(blocker.join("sub"), "d", 4096);
        assert!(matches!(log.log_record(1, 0, b"a"), Err(LogError::Io(_))));
        assert!(!log.is_enabled());
        assert!(matches!(log.log_record(1, 1, b"a"), Err(LogError::Disabled(_))));
    }

    #[test]
    fn truncated_chunk_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = ChunkLogger::new(dir.path(), "t", 200);
        for i in 0..10 {
            log.log_record(3, i, &[i as u8; 40]).unwrap();
        }
        let files = log.finish().unwrap();
        assert!(files.len() >= 3);
        let bytes = fs::read(&files[1]).unwrap();
        fs::write(&files[1], &bytes[..bytes.len() - 3]).unwrap();
        fs::remove_file(&files[2]).unwrap();
        let run = read_run(&files[0]).unwrap();
        assert_eq!(run.gaps.missing, vec![2]);
        assert_eq!(run.gaps.corrupt.len(), 1);
        assert_eq!(run.gaps.corrupt[0].0, 1);
        assert!(!run.gaps.is_complete());
        assert!(run.records.len() < 10);
    }
}
