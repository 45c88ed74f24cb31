//! Sequential reference model for the multiset.
//!
//! The checker replays candidate linearizations against this model, and the
//! randomized single-thread tests compare the lock-free structure's results
//! against it verbatim. Semantics mirror the concurrent structure: `insert`
//! saturates at `u64::MAX`, `delete` removes `count` occurrences only if at
//! least that many are present and reports whether it did.

use std::collections::BTreeMap;

use crate::harness::history::{OpArgs, OpKind, Response};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SequentialMultiset {
    counts: BTreeMap<i64, u64>,
}

impl SequentialMultiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: i64) -> u64 {
        self.counts.get(&key).copied().unwrap_or(0)
    }

    pub fn insert(&mut self, key: i64, count: u64) {
        assert!(count > 0, "insert count must be positive");
        let slot = self.counts.entry(key).or_insert(0);
        *slot = slot.saturating_add(count);
    }

    pub fn delete(&mut self, key: i64, count: u64) -> bool {
        assert!(count > 0, "delete count must be positive");
        match self.counts.get_mut(&key) {
            Some(have) if *have > count => {
                *have -= count;
                true
            }
            Some(have) if *have == count => {
                self.counts.remove(&key);
                true
            }
            _ => false,
        }
    }

    pub fn items(&self) -> Vec<(i64, u64)> {
        self.counts.iter().map(|(&k, &c)| (k, c)).collect()
    }

    pub fn total_keys(&self) -> usize {
        self.counts.len()
    }

    /// Applies one operation and returns the response it produces, in the
    /// same encoding the history recorder uses.
    pub fn apply(&mut self, op: OpKind, args: OpArgs) -> Option<Response> {
        match op {
            OpKind::Get => Some(Response::Count(self.get(args.key))),
            OpKind::Insert => {
                self.insert(args.key, args.count.unwrap_or(1));
                None
            }
            OpKind::Delete => Some(Response::Did(
                self.delete(args.key, args.count.unwrap_or(1)),
            )),
        }
    }
}
