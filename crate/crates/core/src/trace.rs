//! Run traces and the JSONL trace file format.
//!
//! A trace file is one JSON object per line. The first line is a header:
//!
//! ```text
//! {"format":"jointaction-trace","version":"0.1.0","seed":42,"scenario_digest":"…","content_hash":"…"}
//! ```
//!
//! Every following line is an [`Event`]. The content hash is the SHA-256 of
//! the event lines (each terminated by `\n`), so it is independent of the
//! header.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Event, EventKind, ScenarioConfig, TransitionError, WorkspaceState};

pub const TRACE_FORMAT: &str = "jointaction-trace";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("missing or malformed trace header")]
    Header,
    #[error("replay failed at event {index}: {source}")]
    Replay { index: usize, source: TransitionError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: String,
    pub seed: u64,
    pub scenario_digest: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub scenario_digest: String,
    pub events: Vec<Event>,
}

/// SHA-256 hex digest of any serializable value's canonical JSON.
pub fn digest_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    hex::encode(Sha256::digest(bytes))
}

impl Trace {
    pub fn new(seed: u64, scenario_digest: String) -> Self {
        Trace { seed, scenario_digest, events: Vec::new() }
    }

    fn event_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.events.iter().map(|e| serde_json::to_string(e).expect("events serialize"))
    }

    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for line in self.event_lines() {
            h.update(line.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            format: TRACE_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.seed,
            scenario_digest: self.scenario_digest.clone(),
            content_hash: self.content_hash(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for line in self.event_lines() {
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut lines = r.lines();
        let first = lines.next().ok_or(TraceError::Header)??;
        let header: TraceHeader = serde_json::from_str(&first).map_err(|_| TraceError::Header)?;
        if header.format != TRACE_FORMAT {
            return Err(TraceError::Header);
        }
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 2, source })?;
            events.push(e);
        }
        Ok(Trace { seed: header.seed, scenario_digest: header.scenario_digest, events })
    }

    /// Replays every event through the workspace transition function.
    pub fn replay(&self, config: &ScenarioConfig) -> Result<WorkspaceState, TraceError> {
        let mut ws = WorkspaceState::new(config).map_err(|_| TraceError::Header)?;
        for (index, e) in self.events.iter().enumerate() {
            ws.apply_event_mut(e).map_err(|source| TraceError::Replay { index, source })?;
        }
        Ok(ws)
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }
}
