//! Append-only event log: canonical hashing, durable sinks, reading and
//! deterministic replay.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use serde_json::Value as Json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{Engine, EngineError, EngineState, Event, EventRecord};
use crate::scenario::ScenarioDefinition;

/// Serializes JSON with object keys in byte order and no whitespace, so
/// equal values always produce equal bytes.
pub fn canonical_json(value: &Json) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Json, out: &mut String) {
    match value {
        Json::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Json::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
        Json::Array(items) => {
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(v, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_value(value).expect("engine types serialize");
    hex::encode(Sha256::digest(canonical_json(&json).as_bytes()))
}

pub fn state_hash(state: &EngineState) -> String {
    digest(state)
}

/// Digest of a scenario, ignoring the seed and monitor mode, which the
/// genesis record carries separately.
pub fn scenario_digest(def: &ScenarioDefinition) -> String {
    let mut json = serde_json::to_value(def).expect("scenario serializes");
    if let Json::Object(map) = &mut json {
        map.remove("seed");
        map.remove("monitor");
    }
    hex::encode(Sha256::digest(canonical_json(&json).as_bytes()))
}

/// Where committed records go. `append` must not return before the record
/// is durable.
pub trait LogSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()>;
}

#[derive(Debug, Default)]
pub struct NullSink;

impl LogSink for NullSink {
    fn append(&mut self, _: &EventRecord) -> io::Result<()> {
        Ok(())
    }
}

/// JSON lines, flushed and synced per record.
#[derive(Debug)]
pub struct FileSink {
    file: File,
}

impl FileSink {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        Ok(FileSink { file })
    }
}

impl LogSink for FileSink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        let mut line = serde_json::to_string(record).map_err(io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.file.sync_data()
    }
}

/// Keeps records in a shared vector; handy for tests and in-process
/// subscribers.
#[derive(Clone, Debug, Default)]
pub struct MemorySink(pub Arc<Mutex<Vec<EventRecord>>>);

impl LogSink for MemorySink {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        self.0.lock().expect("sink lock").push(record.clone());
        Ok(())
    }
}

impl<S: LogSink + ?Sized> LogSink for Box<S> {
    fn append(&mut self, record: &EventRecord) -> io::Result<()> {
        (**self).append(record)
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("STORAGE_FAILURE: {0}")]
    Io(#[from] io::Error),
    #[error("MALFORMED_RECORD: line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("SEQUENCE_GAP: expected sequence {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("MISSING_GENESIS: the first record must be GENESIS")]
    MissingGenesis,
    #[error("SCENARIO_MISMATCH: log was recorded for scenario {recorded}, not {actual}")]
    ScenarioMismatch { recorded: String, actual: String },
    #[error("HASH_MISMATCH: record {sequence}: logged {expected}, replay produced {actual}")]
    HashMismatch { sequence: u64, expected: String, actual: String },
    #[error("INVALID_RECORD: record {sequence}: {source}")]
    Rejected { sequence: u64, source: EngineError },
}

impl LogError {
    pub fn code(&self) -> &'static str {
        match self {
            LogError::Io(_) => "STORAGE_FAILURE",
            LogError::Malformed { .. } => "MALFORMED_RECORD",
            LogError::SequenceGap { .. } => "SEQUENCE_GAP",
            LogError::MissingGenesis => "MISSING_GENESIS",
            LogError::ScenarioMismatch { .. } => "SCENARIO_MISMATCH",
            LogError::HashMismatch { .. } => "HASH_MISMATCH",
            LogError::Rejected { .. } => "INVALID_RECORD",
        }
    }
}

/// Parses JSON lines and checks that sequences run 0, 1, 2, ...
pub fn parse_log(text: &str) -> Result<Vec<EventRecord>, LogError> {
    read_records(text.as_bytes())
}

pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<EventRecord>, LogError> {
    read_records(BufReader::new(File::open(path)?))
}

fn read_records(reader: impl BufRead) -> Result<Vec<EventRecord>, LogError> {
    let mut out: Vec<EventRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(&line).map_err(|e| LogError::Malformed {
            line: i + 1,
            detail: e.to_string(),
        })?;
        let expected = out.len() as u64;
        if record.sequence != expected {
            return Err(LogError::SequenceGap {
                expected,
                found: record.sequence,
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Re-applies `records` from the genesis state, checking every state hash.
/// An empty log yields the genesis state without a genesis record.
pub fn replay(def: &ScenarioDefinition, records: &[EventRecord]) -> Result<Engine, LogError> {
    replay_into(def, records, Box::new(NullSink))
}

/// Like [`replay`], continuing into `sink` (which receives no replayed
/// records, only new ones).
pub fn replay_into(
    def: &ScenarioDefinition,
    records: &[EventRecord],
    sink: Box<dyn LogSink + Send>,
) -> Result<Engine, LogError> {
    let mut def = def.clone();
    if let Some(first) = records.first() {
        let Event::Genesis { scenario, seed, monitor } = &first.event else {
            return Err(LogError::MissingGenesis);
        };
        let actual = scenario_digest(&def);
        if *scenario != actual {
            return Err(LogError::ScenarioMismatch {
                recorded: scenario.clone(),
                actual,
            });
        }
        def.seed = *seed;
        def.monitor = *monitor;
    }
    let mut engine = Engine::blank(def, sink).map_err(|source| LogError::Rejected { sequence: 0, source })?;
    for (i, record) in records.iter().enumerate() {
        if record.sequence != i as u64 {
            return Err(LogError::SequenceGap {
                expected: i as u64,
                found: record.sequence,
            });
        }
        if i > 0 && matches!(record.event, Event::Genesis { .. }) {
            return Err(LogError::Rejected {
                sequence: record.sequence,
                source: EngineError::InvalidRecord("duplicate genesis".into()),
            });
        }
        let actual = engine
            .replay_record(record)
            .map_err(|source| LogError::Rejected {
                sequence: record.sequence,
                source,
            })?;
        if actual != record.state_hash {
            return Err(LogError::HashMismatch {
                sequence: record.sequence,
                expected: record.state_hash.clone(),
                actual,
            });
        }
    }
    Ok(engine)
}
