//! Append-only NDJSON event log with periodic state snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{Envelope, ReplayError, State};

pub const LOG_FILE: &str = "events.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Deserialize)]
struct Snapshot {
    state: State,
}

#[derive(Serialize)]
struct SnapshotRef<'a> {
    state: &'a State,
}

/// Reads every event in a log file. A missing file is an empty log.
pub fn read_log(path: &Path) -> Result<Vec<Envelope>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| StoreError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

/// Where events go. `Memory` keeps them only in this process.
pub enum EventLog {
    Memory(Vec<Envelope>),
    Disk {
        dir: PathBuf,
        writer: BufWriter<File>,
        snapshot_every: u64,
    },
}

impl EventLog {
    /// Opens (or creates) the log in `dir` and rebuilds state from the
    /// latest snapshot plus the events after it.
    pub fn open(dir: &Path, snapshot_every: u64) -> Result<(EventLog, State), StoreError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let log_path = dir.join(LOG_FILE);
        let snap_path = dir.join(SNAPSHOT_FILE);
        let mut state = match fs::read_to_string(&snap_path) {
            Ok(text) => {
                serde_json::from_str::<Snapshot>(&text)
                    .map_err(|source| StoreError::Parse {
                        path: snap_path.clone(),
                        line: 1,
                        source,
                    })?
                    .state
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => State::default(),
            Err(e) => return Err(io(&snap_path)(e)),
        };
        for e in read_log(&log_path)? {
            if e.seq > state.seq {
                state.apply(&e)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log_path)
            .map_err(io(&log_path))?;
        Ok((
            EventLog::Disk {
                dir: dir.to_path_buf(),
                writer: BufWriter::new(file),
                snapshot_every,
            },
            state,
        ))
    }

    /// Durably appends one event.
    pub fn append(&mut self, envelope: &Envelope) -> Result<(), StoreError> {
        match self {
            EventLog::Memory(events) => events.push(envelope.clone()),
            EventLog::Disk { dir, writer, .. } => {
                let path = dir.join(LOG_FILE);
                let line = serde_json::to_string(envelope).expect("events serialize");
                writer.write_all(line.as_bytes()).map_err(io(&path))?;
                writer.write_all(b"\n").map_err(io(&path))?;
                writer.flush().map_err(io(&path))?;
                writer.get_ref().sync_data().map_err(io(&path))?;
            }
        }
        Ok(())
    }

    /// Writes a snapshot when `state.seq` is a multiple of the interval.
    pub fn maybe_snapshot(&self, state: &State) -> Result<(), StoreError> {
        if let EventLog::Disk { snapshot_every, .. } = self {
            if *snapshot_every > 0 && state.seq.is_multiple_of(*snapshot_every) {
                self.snapshot(state)?;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self, state: &State) -> Result<(), StoreError> {
        let EventLog::Disk { dir, .. } = self else {
            return Ok(());
        };
        let path = dir.join(SNAPSHOT_FILE);
        let tmp = dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let text = serde_json::to_string(&SnapshotRef { state }).expect("state serializes");
        fs::write(&tmp, text).map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))?;
        Ok(())
    }

    /// Events held in memory; empty for a disk log.
    pub fn memory(&self) -> &[Envelope] {
        match self {
            EventLog::Memory(events) => events,
            EventLog::Disk { .. } => &[],
        }
    }
}
