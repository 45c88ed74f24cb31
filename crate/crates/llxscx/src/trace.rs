//! Audit traces.
//!
//! When auditing is enabled, every shared-memory step the primitives take is
//! appended to an in-memory trace (and optionally streamed as newline-delimited
//! JSON). Events reference records and descriptors by the stable ids the
//! domain assigned at creation, never by address, so a deterministic schedule
//! produces a byte-identical trace. The invariant auditors in
//! [`harness::audit`](crate::harness::audit) consume these traces.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::descriptor::ScxState;

/// Serialized form of a field value: a plain value, a record id, or nil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordRepr {
    Value(u64),
    Record(u64),
    Nil,
}

/// How an LLX invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlxOutcome {
    Snapshot,
    Fail,
    Finalized,
}

/// One audited event. Shared-memory steps carry the observed previous value
/// so auditors can replay transitions without reconstructing memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditEvent {
    RecordCreated {
        record: u64,
        fields: Vec<WordRepr>,
    },
    ScxCreated {
        desc: u64,
        v: Vec<u64>,
        r: Vec<u64>,
        fld_record: u64,
        fld_index: usize,
        old: WordRepr,
        new: WordRepr,
        infos: Vec<u64>,
    },
    LlxBegin {
        process: u32,
        record: u64,
    },
    LlxEnd {
        process: u32,
        record: u64,
        outcome: LlxOutcome,
    },
    ScxBegin {
        process: u32,
        desc: u64,
    },
    ScxEnd {
        process: u32,
        desc: u64,
        success: bool,
    },
    VlxBegin {
        process: u32,
        v: Vec<u64>,
    },
    VlxEnd {
        process: u32,
        success: bool,
    },
    HelpReturn {
        process: u32,
        desc: u64,
        success: bool,
    },
    ReadMarked {
        process: u32,
        record: u64,
        value: bool,
    },
    ReadInfo {
        process: u32,
        record: u64,
        desc: u64,
    },
    ReadState {
        process: u32,
        desc: u64,
        state: ScxState,
    },
    ReadAllFrozen {
        process: u32,
        desc: u64,
        value: bool,
    },
    ReadMutable {
        process: u32,
        record: u64,
        field: usize,
        value: WordRepr,
    },
    FreezingCas {
        process: u32,
        record: u64,
        desc: u64,
        expected: u64,
        observed: u64,
        success: bool,
    },
    FrozenStep {
        process: u32,
        desc: u64,
        prev: bool,
    },
    MarkStep {
        process: u32,
        record: u64,
        desc: u64,
        prev: bool,
    },
    UpdateCas {
        process: u32,
        desc: u64,
        record: u64,
        field: usize,
        old: WordRepr,
        new: WordRepr,
        observed: WordRepr,
        success: bool,
    },
    CommitStep {
        process: u32,
        desc: u64,
        prev: ScxState,
    },
    AbortStep {
        process: u32,
        desc: u64,
        prev: ScxState,
    },
    Warning {
        process: u32,
        message: String,
    },
}

/// A trace entry: the global step index plus the event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub event: AuditEvent,
}

/// An ordered sequence of audited events. The order is the order in which the
/// steps took effect on shared memory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes the trace as newline-delimited JSON, one entry per line.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for entry in &self.entries {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Parses a newline-delimited JSON trace. Blank lines are skipped;
    /// anything else that fails to parse is an error.
    pub fn read_ndjson<R: BufRead>(r: R) -> io::Result<Trace> {
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TraceEntry = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            entries.push(entry);
        }
        Ok(Trace { entries })
    }
}
