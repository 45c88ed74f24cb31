//! Concurrent operation histories and their NDJSON serialization.
//!
//! A history is a totally ordered sequence of invoke/respond events over
//! multiset operations. The `seq` field is assigned under a single lock at
//! event time, so it reflects a real-time order consistent with every
//! process's program order. Files hold one JSON object per line.

use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Get,
    Insert,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Invoke,
    Respond,
}

/// Arguments of a multiset operation. `count` is absent for `get`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpArgs {
    pub key: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

impl OpArgs {
    pub fn key(key: i64) -> Self {
        OpArgs { key, count: None }
    }

    pub fn keyed(key: i64, count: u64) -> Self {
        OpArgs {
            key,
            count: Some(count),
        }
    }
}

/// Operation result carried on a respond event. `get` yields a count,
/// `delete` a success flag, `insert` nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Count(u64),
    Did(bool),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEvent {
    pub seq: u64,
    pub process: u32,
    pub op: OpKind,
    pub args: OpArgs,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Response>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub events: Vec<HistoryEvent>,
}

impl History {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> io::Result<Self> {
        let mut events = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: HistoryEvent = serde_json::from_str(&line).map_err(|e| {
                io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("line {}: {}", lineno + 1, e),
                )
            })?;
            events.push(ev);
        }
        Ok(History { events })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_ndjson(io::BufWriter::new(f))
    }

    pub fn load<P: AsRef<Path>>(path: P) -> io::Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_ndjson(io::BufReader::new(f))
    }
}

/// Thread-safe event sink shared by concurrent workers. Sequence numbers
/// are allocated and the event appended under one lock, so the recorded
/// order is a linear order of the actual invoke/respond instants.
#[derive(Debug, Default)]
pub struct HistoryRecorder {
    events: Mutex<Vec<HistoryEvent>>,
}

impl HistoryRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(
        &self,
        process: u32,
        op: OpKind,
        args: OpArgs,
        kind: EventKind,
        value: Option<Response>,
    ) {
        let mut events = self.events.lock().unwrap();
        let seq = events.len() as u64;
        events.push(HistoryEvent {
            seq,
            process,
            op,
            args,
            kind,
            value,
        });
    }

    pub fn invoke(&self, process: u32, op: OpKind, args: OpArgs) {
        self.push(process, op, args, EventKind::Invoke, None);
    }

    pub fn respond(&self, process: u32, op: OpKind, args: OpArgs, value: Option<Response>) {
        self.push(process, op, args, EventKind::Respond, value);
    }

    pub fn finish(self) -> History {
        History {
            events: self.events.into_inner().unwrap(),
        }
    }

    pub fn snapshot(&self) -> History {
        History {
            events: self.events.lock().unwrap().clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> History {
        let rec = HistoryRecorder::new();
        rec.invoke(0, OpKind::Insert, OpArgs::keyed(4, 2));
        rec.invoke(1, OpKind::Get, OpArgs::key(4));
        rec.respond(0, OpKind::Insert, OpArgs::keyed(4, 2), None);
        rec.respond(1, OpKind::Get, OpArgs::key(4), Some(Response::Count(2)));
        rec.invoke(0, OpKind::Delete, OpArgs::keyed(4, 2));
        rec.respond(
            0,
            OpKind::Delete,
            OpArgs::keyed(4, 2),
            Some(Response::Did(true)),
        );
        rec.finish()
    }

    #[test]
    fn recorder_assigns_dense_sequence_numbers() {
        let h = sample();
        assert_eq!(h.len(), 6);
        for (i, ev) in h.events.iter().enumerate() {
            assert_eq!(ev.seq, i as u64);
        }
    }

    #[test]
    fn ndjson_roundtrips() {
        let h = sample();
        let mut buf = Vec::new();
        h.write_ndjson(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), h.len());
        let back = History::read_ndjson(&buf[..]).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn line_format_is_stable() {
        let h = sample();
        let mut buf = Vec::new();
        h.write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            r#"{"seq":0,"process":0,"op":"insert","args":{"key":4,"count":2},"kind":"invoke"}"#
        );
        assert_eq!(
            lines[3],
            r#"{"seq":3,"process":1,"op":"get","args":{"key":4},"kind":"respond","value":2}"#
        );
        assert_eq!(
            lines[5],
            r#"{"seq":5,"process":0,"op":"delete","args":{"key":4,"count":2},"kind":"respond","value":true}"#
        );
    }

    #[test]
    fn blank_lines_are_skipped_and_garbage_is_flagged_with_line_number() {
        let good = "\n{\"seq\":0,\"process\":0,\"op\":\"get\",\"args\":{\"key\":1},\"kind\":\"invoke\"}\n\n";
        let h = History::read_ndjson(good.as_bytes()).unwrap();
        assert_eq!(h.len(), 1);

        let bad = "{\"seq\":0,\"process\":0,\"op\":\"get\",\"args\":{\"key\":1},\"kind\":\"invoke\"}\nnot json\n";
        let err = History::read_ndjson(bad.as_bytes()).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::InvalidData);
        assert!(err.to_string().contains("line 2"), "got: {err}");
    }

    #[test]
    fn response_values_keep_their_shape() {
        // `value` is untagged: a count stays numeric, a did-flag stays boolean.
        let count: Response = serde_json::from_str("17").unwrap();
        assert_eq!(count, Response::Count(17));
        let did: Response = serde_json::from_str("false").unwrap();
        assert_eq!(did, Response::Did(false));
    }
}
