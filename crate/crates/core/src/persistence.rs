//! Checksummed, line-oriented event logs, one per mission, plus transport
//! cursors and a disposable snapshot cache.
//!
//! Layout under the data directory:
//!
//! ```text
//! missions/<mission_id>.log     one record per line
//! cursors/<transport>.cur       decimal position, replaced atomically
//! snapshots/<mission_id>.json   cache of the folded state; safe to delete
//! ```
//!
//! A record line is `<crc32 as 8 lowercase hex digits> <json>\n`, where the
//! checksum covers the JSON bytes and the JSON object is the event with a
//! leading `"v": 1`:
//!
//! ```text
//! 1c291ca3 {"v":1,"seq":2,"mission_id":"m000001","at":"2026-05-02T09:05:00Z","kind":"IdeaSubmitted","payload":{...}}
//! ```
//!
//! A final line that is unterminated or fails its checksum is the remains of
//! an interrupted append: readers ignore it and a writer truncates it on
//! open. A bad line followed by further data is corruption and is reported,
//! never repaired.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::MissionId;
use crate::mission::{next_trigger, replay, Event, MissionError, MissionState, Phase};
use crate::time::Timestamp;

pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("mission {0} not found")]
    NotFound(MissionId),
    #[error("log for {mission} expects seq {expected}, got {got}")]
    SequenceConflict {
        mission: MissionId,
        expected: u64,
        got: u64,
    },
    #[error("corrupt record at line {line} of {path}")]
    CorruptRecord { path: PathBuf, line: usize },
    #[error("log for {0} is held by another writer")]
    Locked(MissionId),
    #[error("storage full")]
    StorageFull,
    #[error("log for {mission} does not fold: {source}")]
    Illegal {
        mission: MissionId,
        source: MissionError,
    },
    #[error(transparent)]
    Io(io::Error),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::StorageFull {
            StoreError::StorageFull
        } else {
            StoreError::Io(e)
        }
    }
}

#[derive(Serialize)]
struct RecordOut<'a> {
    v: u32,
    #[serde(flatten)]
    event: &'a Event,
}

#[derive(Deserialize)]
struct RecordIn {
    v: u32,
    #[serde(flatten)]
    event: Event,
}

/// Serializes one event as a complete log line, newline included.
pub fn encode_record(event: &Event) -> String {
    let json = serde_json::to_string(&RecordOut {
        v: RECORD_VERSION,
        event,
    })
    .expect("events always serialize");
    format!("{:08x} {json}\n", crc32fast::hash(json.as_bytes()))
}

/// Parses one line without its newline; `None` if the checksum, version or
/// shape is wrong.
pub fn decode_record(line: &[u8]) -> Option<Event> {
    let (crc, json) = line.split_at_checked(8)?;
    let json = json.strip_prefix(b" ")?;
    let crc = u32::from_str_radix(std::str::from_utf8(crc).ok()?, 16).ok()?;
    if crc32fast::hash(json) != crc {
        return None;
    }
    let record: RecordIn = serde_json::from_slice(json).ok()?;
    (record.v == RECORD_VERSION).then_some(record.event)
}

/// Result of scanning a log's bytes.
#[derive(Debug)]
pub struct Scan {
    pub events: Vec<Event>,
    /// Length of the prefix made of intact records.
    pub valid_len: u64,
    /// Whether bytes past `valid_len` were dropped as a torn tail.
    pub torn: bool,
}

pub fn scan_log(bytes: &[u8], path: &Path) -> Result<Scan, StoreError> {
    let mut events = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            // an append that never finished
            return Ok(Scan {
                events,
                valid_len: offset as u64,
                torn: true,
            });
        };
        match decode_record(&rest[..nl]) {
            Some(event) => events.push(event),
            None if offset + nl + 1 == bytes.len() => {
                return Ok(Scan {
                    events,
                    valid_len: offset as u64,
                    torn: true,
                })
            }
            None => {
                return Err(StoreError::CorruptRecord {
                    path: path.to_path_buf(),
                    line: line_no,
                })
            }
        }
        offset += nl + 1;
    }
    Ok(Scan {
        events,
        valid_len: offset as u64,
        torn: false,
    })
}

/// Exclusive append handle for one mission log. The OS file lock is held for
/// the handle's lifetime.
#[derive(Debug)]
pub struct LogWriter {
    mission_id: MissionId,
    file: File,
    len: u64,
    last_seq: u64,
}

impl LogWriter {
    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Appends and syncs one record. The event must carry the next seq.
    pub fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        let expected = self.last_seq + 1;
        if event.seq != expected || event.mission_id != self.mission_id {
            return Err(StoreError::SequenceConflict {
                mission: self.mission_id.clone(),
                expected,
                got: event.seq,
            });
        }
        let line = encode_record(event);
        self.write_raw(line.as_bytes())?;
        self.last_seq = event.seq;
        Ok(())
    }

    fn write_raw(&mut self, bytes: &[u8]) -> Result<(), StoreError> {
        self.file.seek(SeekFrom::Start(self.len))?;
        if let Err(e) = self.file.write_all(bytes).and_then(|_| self.file.sync_data()) {
            // leave no partial line behind if we can help it
            let _ = self.file.set_len(self.len);
            return Err(e.into());
        }
        self.len += bytes.len() as u64;
        Ok(())
    }

    /// Writes the first `n` bytes of the record for `event` and stops, as a
    /// crash in the middle of an append would. Test hook.
    pub fn append_torn(&mut self, event: &Event, n: usize) -> Result<(), StoreError> {
        let line = encode_record(event);
        let n = n.min(line.len());
        self.file.seek(SeekFrom::Start(self.len))?;
        self.file.write_all(&line.as_bytes()[..n])?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// One row of the mission listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionListing {
    pub mission_id: MissionId,
    pub phase: Phase,
    pub next_trigger: Option<Timestamp>,
}

impl MissionListing {
    pub fn of(state: &MissionState) -> Self {
        Self {
            mission_id: state.mission_id.clone(),
            phase: state.phase,
            next_trigger: next_trigger(state).map(|(t, _)| t),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    v: u32,
    log_len: u64,
    state: MissionState,
}

/// A data directory.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for sub in ["missions", "cursors", "snapshots"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self, id: &MissionId) -> PathBuf {
        self.root.join("missions").join(format!("{id}.log"))
    }

    fn snapshot_path(&self, id: &MissionId) -> PathBuf {
        self.root.join("snapshots").join(format!("{id}.json"))
    }

    fn cursor_path(&self, transport: &str) -> PathBuf {
        self.root.join("cursors").join(format!("{transport}.cur"))
    }

    /// Opens (creating if needed) the log for writing, truncating a torn tail.
    pub fn writer(&self, id: &MissionId) -> Result<LogWriter, StoreError> {
        let path = self.log_path(id);
        let mut file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(&path)?;
        match file.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(id.clone())),
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        let scan = scan_log(&bytes, &path)?;
        if scan.torn {
            tracing::warn!(
                mission = %id,
                dropped = bytes.len() as u64 - scan.valid_len,
                "truncating torn log tail"
            );
            file.set_len(scan.valid_len)?;
            file.sync_all()?;
        }
        Ok(LogWriter {
            mission_id: id.clone(),
            file,
            len: scan.valid_len,
            last_seq: scan.events.last().map_or(0, |e| e.seq),
        })
    }

    /// All intact records in order. Readers never modify the file.
    pub fn read_events(&self, id: &MissionId) -> Result<Vec<Event>, StoreError> {
        Ok(self.read_scan(id)?.events)
    }

    fn read_scan(&self, id: &MissionId) -> Result<Scan, StoreError> {
        let path = self.log_path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.clone()))
            }
            Err(e) => return Err(e.into()),
        };
        scan_log(&bytes, &path)
    }

    pub fn replay(&self, id: &MissionId) -> Result<MissionState, StoreError> {
        let events = self.read_events(id)?;
        fold(id, &events)
    }

    pub fn mission_ids(&self) -> Result<Vec<MissionId>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("missions"))? {
            let name = entry?.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".log")) else {
                continue;
            };
            if let Ok(id) = MissionId::parse(stem) {
                ids.push(id);
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Listing by fresh replay of every log. Logs without a creation record
    /// (an interrupted first append) are skipped.
    pub fn list_missions(&self) -> Result<Vec<MissionListing>, StoreError> {
        let mut out = Vec::new();
        for id in self.mission_ids()? {
            match self.replay(&id) {
                Ok(state) => out.push(MissionListing::of(&state)),
                Err(StoreError::NotFound(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Same listing, served from snapshots whose recorded log length still
    /// matches; stale or missing snapshots are rebuilt.
    pub fn list_missions_cached(&self) -> Result<Vec<MissionListing>, StoreError> {
        let mut out = Vec::new();
        for id in self.mission_ids()? {
            match self.state_cached(&id) {
                Ok(state) => out.push(MissionListing::of(&state)),
                Err(StoreError::NotFound(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Folded state via the snapshot cache.
    pub fn state_cached(&self, id: &MissionId) -> Result<MissionState, StoreError> {
        let scan = self.read_scan(id)?;
        let snap_path = self.snapshot_path(id);
        if let Ok(bytes) = fs::read(&snap_path) {
            if let Ok(snap) = serde_json::from_slice::<Snapshot>(&bytes) {
                if snap.v == RECORD_VERSION && snap.log_len == scan.valid_len {
                    return Ok(snap.state);
                }
            }
        }
        let state = fold(id, &scan.events)?;
        let snap = Snapshot {
            v: RECORD_VERSION,
            log_len: scan.valid_len,
            state,
        };
        // the cache is best effort
        if let Err(e) = write_atomic(&snap_path, &serde_json::to_vec(&snap).expect("serializable")) {
            tracing::debug!(error = %e, "snapshot not written");
        }
        Ok(snap.state)
    }

    pub fn load_cursor(&self, transport: &str) -> Result<u64, StoreError> {
        match fs::read_to_string(self.cursor_path(transport)) {
            Ok(text) => Ok(text.trim().parse().unwrap_or(0)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(e.into()),
        }
    }

    pub fn save_cursor(&self, transport: &str, position: u64) -> Result<(), StoreError> {
        write_atomic(&self.cursor_path(transport), format!("{position}\n").as_bytes())
    }
}

fn fold(id: &MissionId, events: &[Event]) -> Result<MissionState, StoreError> {
    if events.is_empty() {
        return Err(StoreError::NotFound(id.clone()));
    }
    replay(events).map_err(|source| StoreError::Illegal {
        mission: id.clone(),
        source,
    })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("paths live in a directory");
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_data()?;
    tmp.persist(path).map_err(|e| StoreError::from(e.error))?;
    Ok(())
}
