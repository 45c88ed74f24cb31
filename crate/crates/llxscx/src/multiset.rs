//! A lock-free sorted-list multiset.
//!
//! One singly linked list of nodes in strictly increasing key order, bracketed
//! by sentinels at minus and plus infinity. Each node's key is immutable; its
//! occurrence count and next pointer are the two mutable fields. Adding to an
//! existing key CASes the count upward in place. Removing occurrences never
//! decrements in place: the node is replaced by a lighter copy (or spliced out
//! together with a fresh copy of its successor), and the displaced nodes are
//! finalized, so a node's count field only ever moves upward and a finalized
//! node can never rejoin the list. All updates go through `scx` over the
//! nodes a retry loop has link-loaded; traversals use plain field reads.

use std::sync::Arc;

use crate::process::{LlxResult, Process};
use crate::record::{DataRecordHandle, Field, FieldRef};
use crate::word::{FieldKind, RecordSchema, Word};
use crate::Domain;

/// Node key space: client keys are any `i64`, strictly between the two
/// sentinel keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Key {
    NegInf,
    Client(i64),
    PosInf,
}

const TAG_NEG_INF: u64 = 0;
const TAG_CLIENT: u64 = 1;
const TAG_POS_INF: u64 = 2;

impl Key {
    fn encode(self) -> [Word; 2] {
        match self {
            Key::NegInf => [Word::Value(TAG_NEG_INF), Word::Value(0)],
            Key::Client(k) => [Word::Value(TAG_CLIENT), Word::Value(k as u64)],
            Key::PosInf => [Word::Value(TAG_POS_INF), Word::Value(0)],
        }
    }

    fn decode(tag: u64, payload: u64) -> Key {
        match tag {
            TAG_NEG_INF => Key::NegInf,
            TAG_CLIENT => Key::Client(payload as i64),
            TAG_POS_INF => Key::PosInf,
            _ => panic!("invalid key tag {tag}"),
        }
    }
}

/// Mutable field indices of a node.
pub const NODE_COUNT: usize = 0;
pub const NODE_NEXT: usize = 1;

/// The multiset. Clone-free; share by reference (operations only need `&self`
/// plus a per-thread [`Process`]).
pub struct Multiset {
    domain: Arc<Domain>,
    schema: Arc<RecordSchema>,
    head: DataRecordHandle,
}

impl Multiset {
    /// Creates an empty multiset in `domain`: a head sentinel pointing at a
    /// tail sentinel, both with count zero.
    pub fn new(domain: Arc<Domain>) -> Multiset {
        let schema = Arc::new(RecordSchema::new(
            vec![FieldKind::Value, FieldKind::Handle],
            vec![FieldKind::Value, FieldKind::Value],
        ));
        let tail = domain.new_record(
            &schema,
            &[Word::Value(0), Word::Handle(None)],
            &Key::PosInf.encode(),
        );
        let head = domain.new_record(
            &schema,
            &[Word::Value(0), Word::Handle(Some(tail))],
            &Key::NegInf.encode(),
        );
        Multiset {
            domain,
            schema,
            head,
        }
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    /// The head sentinel. Never finalized.
    pub fn head(&self) -> DataRecordHandle {
        self.head
    }

    /// The key of a node, read from its immutable fields.
    pub fn node_key(&self, p: &mut Process, node: DataRecordHandle) -> Key {
        let tag = p.read_field(node, Field::Immutable(0)).as_value().unwrap();
        let payload = p.read_field(node, Field::Immutable(1)).as_value().unwrap();
        Key::decode(tag, payload)
    }

    fn read_next(&self, p: &mut Process, node: DataRecordHandle) -> Option<DataRecordHandle> {
        p.read_field(node, Field::Mutable(NODE_NEXT))
            .as_handle()
            .unwrap()
    }

    fn new_node(&self, key: Key, count: u64, next: Option<DataRecordHandle>) -> DataRecordHandle {
        self.domain.new_record(
            &self.schema,
            &[Word::Value(count), Word::Handle(next)],
            &key.encode(),
        )
    }

    /// Walks from the head with plain reads and returns `(r, p)` where `p` is
    /// the last node with `p.key < key` and `r` is its successor, so
    /// `p.key < key <= r.key`. No synchronization; callers revalidate with
    /// `llx` before depending on the result.
    pub fn search(&self, p: &mut Process, key: i64) -> (DataRecordHandle, DataRecordHandle) {
        let key = Key::Client(key);
        let mut prev = self.head;
        let mut r = self
            .read_next(p, prev)
            .expect("head sentinel always has a successor");
        while key > self.node_key(p, r) {
            prev = r;
            r = self
                .read_next(p, r)
                .expect("interior node always has a successor");
        }
        (r, prev)
    }

    /// Number of occurrences of `key`, zero if absent.
    pub fn get(&self, p: &mut Process, key: i64) -> u64 {
        let (r, _) = self.search(p, key);
        if self.node_key(p, r) == Key::Client(key) {
            p.read_field(r, Field::Mutable(NODE_COUNT))
                .as_value()
                .unwrap()
        } else {
            0
        }
    }

    /// Adds `count` occurrences of `key` (`count > 0`). The count of a key
    /// saturates at `u64::MAX`; saturation is recorded as an audit warning.
    pub fn insert(&self, p: &mut Process, key: i64, count: u64) {
        assert!(count > 0, "insert: count must be positive");
        let ck = Key::Client(key);
        loop {
            let (r, prev) = self.search(p, key);
            if self.node_key(p, r) == ck {
                if let LlxResult::Snapshot(snap) = p.llx(r) {
                    let old = snap.value(NODE_COUNT);
                    let new = old.saturating_add(count);
                    if new != old.wrapping_add(count) {
                        p.emit_warning(format!(
                            "insert({key}, {count}): count saturated at u64::MAX"
                        ));
                    }
                    if new == old {
                        // Already at the cap; the insert is a no-op.
                        return;
                    }
                    let fld = FieldRef {
                        record: r,
                        field: NODE_COUNT,
                    };
                    if p.scx(&[r], &[], fld, Word::Value(new)) {
                        return;
                    }
                }
            } else if let LlxResult::Snapshot(snap) = p.llx(prev) {
                if snap.handle(NODE_NEXT) == Some(r) {
                    let node = self.new_node(ck, count, Some(r));
                    let fld = FieldRef {
                        record: prev,
                        field: NODE_NEXT,
                    };
                    if p.scx(&[prev], &[], fld, Word::Handle(Some(node))) {
                        return;
                    }
                }
            }
            p.note_retry();
        }
    }

    /// Removes `count` occurrences of `key` (`count > 0`). True on success;
    /// false (with nothing removed) if fewer than `count` occurrences exist.
    pub fn delete(&self, p: &mut Process, key: i64, count: u64) -> bool {
        assert!(count > 0, "delete: count must be positive");
        let ck = Key::Client(key);
        loop {
            let (r, prev) = self.search(p, key);
            let local_p = p.llx(prev);
            let local_r = p.llx(r);
            if let (LlxResult::Snapshot(sp), LlxResult::Snapshot(sr)) = (&local_p, &local_r) {
                if sp.handle(NODE_NEXT) != Some(r) {
                    p.note_retry();
                    continue;
                }
                let have = sr.value(NODE_COUNT);
                if self.node_key(p, r) != ck || have < count {
                    return false;
                }
                let fld = FieldRef {
                    record: prev,
                    field: NODE_NEXT,
                };
                if have > count {
                    // Replace r with a lighter copy; r is finalized.
                    let node = self.new_node(ck, have - count, sr.handle(NODE_NEXT));
                    if p.scx(&[prev, r], &[r], fld, Word::Handle(Some(node))) {
                        return true;
                    }
                } else {
                    // Remove r outright. Its successor is replaced by a fresh
                    // copy so that r and the successor can both be finalized
                    // and the update stays a single-field CAS on prev.next.
                    let rnext = sr
                        .handle(NODE_NEXT)
                        .expect("node with a client key always has a successor");
                    if let LlxResult::Snapshot(sn) = p.llx(rnext) {
                        let rnext_key = self.node_key(p, rnext);
                        let copy =
                            self.new_node(rnext_key, sn.value(NODE_COUNT), sn.handle(NODE_NEXT));
                        if p.scx(
                            &[prev, r, rnext],
                            &[r, rnext],
                            fld,
                            Word::Handle(Some(copy)),
                        ) {
                            return true;
                        }
                    }
                }
            }
            p.note_retry();
        }
    }

    /// Collects the current `(key, count)` pairs in list order with plain
    /// reads. Only meaningful while no updates are running.
    pub fn items(&self, p: &mut Process) -> Vec<(i64, u64)> {
        let mut out = Vec::new();
        let mut node = self.head;
        while let Some(next) = self.read_next(p, node) {
            node = next;
            if let Key::Client(k) = self.node_key(p, node) {
                let count = p
                    .read_field(node, Field::Mutable(NODE_COUNT))
                    .as_value()
                    .unwrap();
                out.push((k, count));
            }
        }
        out
    }

    /// Quiescent structural audit: verifies the chain runs from the minus to
    /// the plus sentinel in strictly increasing key order with positive
    /// counts on every client node, and returns the items. Only meaningful
    /// while no updates are running.
    pub fn check_sorted_chain(&self, p: &mut Process) -> Result<Vec<(i64, u64)>, String> {
        let mut out = Vec::new();
        let mut node = self.head;
        let mut key = self.node_key(p, node);
        if key != Key::NegInf {
            return Err(format!("head sentinel has key {key:?}"));
        }
        let limit = self.domain.all_records().len() + 1;
        for _ in 0..limit {
            let next = match self.read_next(p, node) {
                Some(next) => next,
                None => {
                    if key != Key::PosInf {
                        return Err(format!("chain ends at {key:?}, not the plus sentinel"));
                    }
                    return Ok(out);
                }
            };
            let next_key = self.node_key(p, next);
            if next_key <= key {
                return Err(format!("keys out of order: {key:?} then {next_key:?}"));
            }
            if let Key::Client(k) = next_key {
                let count = p
                    .read_field(next, Field::Mutable(NODE_COUNT))
                    .as_value()
                    .unwrap();
                if count == 0 {
                    return Err(format!("client key {k} has count zero"));
                }
                out.push((k, count));
            }
            node = next;
            key = next_key;
        }
        Err("chain does not terminate (cycle suspected)".to_string())
    }
}
